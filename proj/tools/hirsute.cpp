#include "hirsute/cli.hpp"

int main(int argc, char** argv) { return hirsute::cli::run(argc, argv); }
