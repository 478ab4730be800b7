#include "gradflip_cli/cli.hpp"

int main(int argc, char** argv) { return gradflip::cli::run(argc, argv); }
