#include "protocolnet/cli.hpp"

int main(int argc, char** argv) { return protocolnet::run_cli(argc, argv); }
