// Copyright 2026 mvlab contributors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef MVLAB_CLI_HPP
#define MVLAB_CLI_HPP

namespace mvlab::cli {

// Subcommand dispatch. Exit codes: 0 success/pass, 1 criterion failure,
// 2 input error (bad config, unknown subcommand).
int dispatch(int argc, const char* const* argv);

}  // namespace mvlab::cli

#endif  // MVLAB_CLI_HPP
