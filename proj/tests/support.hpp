#pragma once

#include <gtest/gtest.h>

#include <cmath>
#include <string>

#include "suplab/counters.hpp"
#include "suplab/error.hpp"

namespace suplab::test {

// A consistent mid-sized snapshot; every ratio is non-trivial.
inline CounterSnapshot sample_snapshot() {
  CounterSnapshot s;
  s.total_cycles = 1'000'000;
  s.stall_cycles_total = 600'000;
  s.backend_stall_cycles = 500'000;
  s.mem_stall_cycles = 300'000;
  s.llc_miss_demand_stall_cycles = 200'000;
  s.l1_demand_hits = 3'000'000;
  s.lfb_hits = 1'000'000;
  s.store_buffer_full_stall_cycles = 50'000;
  s.stall_l1 = 40'000;
  s.stall_l2 = 30'000;
  s.stall_l3 = 20'000;
  s.offcore_demand_requests = 2'000;
  s.offcore_demand_occupancy = 400'000;
  s.l1_prefetch_l3_miss = 5'000;
  s.l1_prefetch_total = 20'000;
  s.l2_prefetch_l3_miss = 3'000;
  s.l2_prefetch_l3_hit = 1'000;
  s.instructions = 800'000;
  return s;
}

inline double rel_err(double got, double want) { return std::abs(got - want) / std::abs(want); }

}  // namespace suplab::test

#define EXPECT_ERRC(stmt, errc)                                             \
  do {                                                                      \
    try {                                                                   \
      stmt;                                                                 \
      ADD_FAILURE() << "expected " << ::suplab::to_string(errc);            \
    } catch (const ::suplab::Error& e) {                                    \
      EXPECT_EQ(e.code(), errc) << e.what();                                \
    }                                                                       \
  } while (0)
