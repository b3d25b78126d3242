#pragma once

namespace dehaze {

// Entry point behind the `dehaze` binary; also callable from tests.
// Exit codes: 0 success, 1 usage error, 2 runtime error.
int run_cli(int argc, const char* const* argv);

}  // namespace dehaze
