// qfid.cpp
// Command-line entry point.

#include "cli.hpp"

int main(int argc, char** argv) { return qfid::cli::run(argc, argv); }
