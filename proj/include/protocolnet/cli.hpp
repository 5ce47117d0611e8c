#pragma once

namespace protocolnet {

/// Entry point for the `protocolnet` tool.
/// Exit codes: 0 success, 1 validation error (flags, inputs), 2 runtime failure.
int run_cli(int argc, char** argv);

}  // namespace protocolnet
