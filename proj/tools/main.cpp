#include "cli.hpp"

int main(int argc, char** argv) { return fracconv::cli::main(argc, argv); }
