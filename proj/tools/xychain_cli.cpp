// xychain_cli.cpp — entry point of the xychain command-line tool
#include "cli_app.hpp"

int main(int argc, char** argv) { return xychain::cli::run(argc, argv); }
