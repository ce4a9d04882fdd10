#include "cli_commands.hpp"

int main(int argc, char** argv) { return merton_arena::cli::run(argc, argv); }
