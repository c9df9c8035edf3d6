#include "wsfl/cli.hpp"

int main(int argc, char** argv) { return wsfl::cli_main(argc, argv); }
