#include "sparseweak/cli.hpp"

int main(int argc, char** argv) { return sparseweak::run_cli(argc, argv); }
