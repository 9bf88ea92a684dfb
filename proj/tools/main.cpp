#include "symlab/cli.hpp"

int main(int argc, char** argv) { return symlab::run_cli(argc, argv); }
