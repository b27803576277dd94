#include "hardylab/cli_io.hpp"

int main(int argc, char** argv) { return hardylab::run_cli(argc, argv); }
