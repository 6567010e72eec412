// Copyright 2026 The hflsim Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <vector>

namespace hfl {

/// One cloud, C edge servers, and N_l devices behind edge server l.
struct Topology {
  std::vector<int> devices_per_set;

  int num_sets() const { return static_cast<int>(devices_per_set.size()); }
  int total_devices() const;
  int max_set_size() const;
  int min_set_size() const;
  /// Global index of device n in set l (sets laid out consecutively).
  int device_offset(int set) const;

  void validate() const;
};

}  // namespace hfl
