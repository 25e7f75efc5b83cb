#include "lyacert/cli/commands.hpp"

int main(int argc, char** argv) { return lyacert::cli::run(argc, argv); }
