#include "cli.hpp"

int main(int argc, char** argv) { return evade::cli_main(argc, argv); }
