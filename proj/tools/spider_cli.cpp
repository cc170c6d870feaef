#include "spider/cli.hpp"

int main(int argc, char** argv) { return spider::run_cli(argc, argv); }
