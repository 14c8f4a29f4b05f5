#include "upacrl/cli.hpp"

int main(int argc, char** argv) { return upacrl::cli::main(argc, argv); }
