// Copyright 2026 The hflsim Authors
// SPDX-License-Identifier: Apache-2.0

#include "hfl/topology.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>
#include <string>

namespace hfl {

int Topology::total_devices() const {
  return std::accumulate(devices_per_set.begin(), devices_per_set.end(), 0);
}

int Topology::max_set_size() const {
  return *std::max_element(devices_per_set.begin(), devices_per_set.end());
}

int Topology::min_set_size() const {
  return *std::min_element(devices_per_set.begin(), devices_per_set.end());
}

int Topology::device_offset(int set) const {
  return std::accumulate(devices_per_set.begin(), devices_per_set.begin() + set, 0);
}

void Topology::validate() const {
  if (devices_per_set.empty()) {
    throw std::invalid_argument("topology needs at least one device set");
  }
  for (std::size_t l = 0; l < devices_per_set.size(); ++l) {
    if (devices_per_set[l] < 1) {
      throw std::invalid_argument("device set " + std::to_string(l) +
                                  " must contain at least one device");
    }
  }
}

}  // namespace hfl
