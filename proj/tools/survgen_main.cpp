#include "survgen/cli.hpp"

int main(int argc, char** argv) { return survgen::run_cli(argc, argv); }
