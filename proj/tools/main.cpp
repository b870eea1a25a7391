#include "lisaliency/cli.hpp"

int main(int argc, char** argv) { return lisaliency::cli_main(argc, argv); }
