#pragma once

namespace lisaliency {

// Entry point of the `lisaliency` tool. Returns the process exit code: 0 on
// success, 2 for usage errors, 1 for runtime failures.
int cli_main(int argc, char** argv);

}  // namespace lisaliency
