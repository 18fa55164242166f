#include "tandem/cli.hpp"

int main(int argc, char** argv) { return tandem::run_cli(argc, argv); }
