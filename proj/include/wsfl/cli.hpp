#pragma once

namespace wsfl {

/// Entry point behind the `wsfl` binary. Returns 0 on success, 1 on runtime
/// failure, 2 on usage/config errors. Exposed as a library function so the
/// commands can be exercised in-process by tests.
int cli_main(int argc, const char* const* argv);

}  // namespace wsfl
