#include "cli.hpp"

int main(int argc, char** argv) { return metsize::cli::run_cli(argc, argv); }
