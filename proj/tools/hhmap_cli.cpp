#include "hhmap/cli.hpp"

int main(int argc, char** argv) { return hhmap::cli::run(argc, argv); }
