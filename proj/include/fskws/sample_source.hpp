#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "fskws/rng.hpp"
#include "fskws/waveform.hpp"

namespace fskws {

// One keyword identity. Oracle classes carry a unit-id sequence; directory
// datasets carry the keyword string. The id is unique within a source.
struct KeywordClass {
  std::uint64_t id = 0;
  std::string name;
  std::vector<int> unit_ids;
};

// Produces multi-view keyword samples: groups of utterances sharing one
// keyword identity across varied speaker/prosody renderings.
class SampleSource {
 public:
  virtual ~SampleSource() = default;

  // A fresh keyword class.
  virtual KeywordClass new_class(Rng& rng) const = 0;

  // One new view of the class. Never changes the class identity.
  virtual Waveform render(const KeywordClass& cls, Rng& rng) const = 0;

  // All classes, for finite sources; empty for unbounded generators.
  virtual std::vector<KeywordClass> list_classes() const { return {}; }
};

}  // namespace fskws
