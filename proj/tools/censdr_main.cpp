#include "censdr/cli.hpp"

int main(int argc, char** argv) { return censdr::run_cli(argc, argv); }
