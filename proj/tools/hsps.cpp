#include "hsps/cli.hpp"

int main(int argc, char** argv) { return hsps::cli::main(argc, argv); }
