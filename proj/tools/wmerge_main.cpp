#include "wmerge/cli/cli.hpp"

int main(int argc, char** argv) { return wmerge::cli::run(argc, argv); }
