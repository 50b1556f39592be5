#include "goemo/cli.hpp"

int main(int argc, char** argv) { return goemo::cli::main(argc, argv); }
