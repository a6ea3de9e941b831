#include "cli.hpp"

int main(int argc, char** argv) { return genret::cli::main(argc, argv); }
