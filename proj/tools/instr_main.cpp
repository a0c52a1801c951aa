#include "instr/cli.hpp"

int main(int argc, char** argv) { return instr::cli::runMain(argc, argv); }
