#include "agbada/cli.hpp"

int main(int argc, char** argv) { return agbada::cli::run(argc, argv); }
