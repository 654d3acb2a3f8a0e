#include "mbda/cli.hpp"

int main(int argc, char** argv) { return mbda::run_cli(argc, argv); }
