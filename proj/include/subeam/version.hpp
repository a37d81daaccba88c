// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 the subeam authors. See LICENSE for terms.

#pragma once

namespace subeam {

inline constexpr int version_major = 1;
inline constexpr int version_minor = 0;
inline constexpr int version_patch = 0;
inline constexpr const char* version_string = "1.0.0";

// Schema version stamped into JSON experiment reports.
inline constexpr int report_schema_version = 1;

} // namespace subeam
