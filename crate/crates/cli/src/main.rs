// Copyright 2026 The msgate Developers
// SPDX-License-Identifier: Apache-2.0

fn main() {
    std::process::exit(msgate_cli::run(std::env::args_os()));
}
