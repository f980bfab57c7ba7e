#include "crowdmot/cli.hpp"

int main(int argc, char** argv) { return crowdmot::cli::main_entry(argc, argv); }
