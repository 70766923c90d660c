#include "ragaid/cli.hpp"

int main(int argc, char** argv) { return ragaid::run_cli(argc, argv); }
