#include "rvm/cli.hpp"

int main(int argc, char** argv) { return rvm::cli::main(argc, argv); }
