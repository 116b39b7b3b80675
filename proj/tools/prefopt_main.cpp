#include "prefopt/cli.hpp"

int main(int argc, char** argv) { return prefopt::cli::run(argc, argv); }
