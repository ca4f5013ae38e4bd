#pragma once

#include <span>
#include <string>

#include "pbandit/mirror.hpp"
#include "pbandit/protocol.hpp"

namespace pbandit {

struct Decision {
  SimplexPoint distribution;
  Arm arm = 0;
};

// Round-loop contract. At every round t the harness calls act(t, u) with a
// fresh uniform u from the learner's action stream, then observe(t, events)
// with the feedback delivered at the end of round t.
class Learner {
 public:
  virtual ~Learner() = default;

  virtual std::string name() const = 0;
  virtual Decision act(Round t, double u) = 0;
  virtual void observe(Round t, std::span<const FeedbackEvent> arrivals) = 0;

  // Mixing weight used at the most recent act(); 1 for learners without one.
  virtual double alpha() const { return 1.0; }
  virtual int stage() const { return 1; }
  virtual int phase() const { return 1; }
};

}  // namespace pbandit
