#pragma once

namespace ragaid {

/// Command-line front end. Returns the process exit code: 0 on success, 2 for an empty
/// database, 1 for any other error.
int run_cli(int argc, char** argv);

}  // namespace ragaid
