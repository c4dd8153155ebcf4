#pragma once

namespace sseg {

// Full command-line entry point (also used in-process by tests). Returns the
// process exit code; module errors print as "error: <category>: <message>".
int run_cli(int argc, const char* const* argv);

}  // namespace sseg
