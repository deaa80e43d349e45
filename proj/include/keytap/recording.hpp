#pragma once

#include <string>
#include <vector>

#include "keytap/dataset.hpp"
#include "keytap/signal.hpp"

namespace keytap {

// One audio file with its labels. Keystroke clips carry a single key in
// `label`; typing sessions carry the typed sequence and one onset per key.
struct Recording {
  AudioBuffer audio;
  std::string label;
  SampleMeta meta;
  std::vector<double> onsets_s;
};

}  // namespace keytap
