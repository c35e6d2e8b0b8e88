// Copyright 2026 The cflm Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Test-only reference implementations. Nothing here calls into the code
// paths it is used to check.

#ifndef CFLM_TESTS_ORACLES_H_
#define CFLM_TESTS_ORACLES_H_

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <functional>
#include <map>
#include <vector>

#include "cflm/align.h"
#include "cflm/asrsim.h"

namespace cflm::oracle {

// Top-down memoized Levenshtein distance.
inline int edit_distance(const std::vector<TokenId>& ref,
                         const std::vector<TokenId>& hyp) {
  std::map<std::pair<std::size_t, std::size_t>, int> memo;
  std::function<int(std::size_t, std::size_t)> go = [&](std::size_t i,
                                                        std::size_t j) -> int {
    if (i == ref.size()) return static_cast<int>(hyp.size() - j);
    if (j == hyp.size()) return static_cast<int>(ref.size() - i);
    auto key = std::make_pair(i, j);
    if (auto it = memo.find(key); it != memo.end()) return it->second;
    int best = go(i + 1, j + 1) + (ref[i] == hyp[j] ? 0 : 1);
    best = std::min(best, go(i + 1, j) + 1);
    best = std::min(best, go(i, j + 1) + 1);
    memo[key] = best;
    return best;
  };
  return go(0, 0);
}

enum class Op { kMatch, kSub, kDel, kIns };

// Searches alignment paths backwards from the end of both sequences, trying
// Match, Sub, Del, Ins in that order, for increasing cost budgets. The
// first complete path found under the smallest feasible budget is the
// minimal-cost alignment whose reversed op sequence is lexicographically
// least under that order.
class BruteForceAnnotator {
 public:
  BruteForceAnnotator(const std::vector<TokenId>& ref,
                      const std::vector<TokenId>& hyp)
      : ref_(ref), hyp_(hyp) {}

  // Ops in forward order.
  std::vector<Op> alignment() {
    const int n = static_cast<int>(ref_.size());
    const int m = static_cast<int>(hyp_.size());
    for (int budget = std::abs(n - m);; ++budget) {
      path_.clear();
      if (search(n, m, budget)) {
        return std::vector<Op>(path_.rbegin(), path_.rend());
      }
    }
  }

  std::vector<Label> labels(bool deletions, bool insertions) {
    std::vector<Label> out(ref_.size() + 1, 0);
    std::size_t i = 0;
    bool after_insert = false;
    for (Op op : alignment()) {
      if (op == Op::kIns) {
        if (insertions) after_insert = true;
        continue;
      }
      if (after_insert) out[i] = 1;
      after_insert = false;
      if (op == Op::kSub || (op == Op::kDel && deletions)) out[i] = 1;
      ++i;
    }
    if (after_insert) out[ref_.size()] = 1;
    return out;
  }

  int cost() {
    int c = 0;
    for (Op op : alignment()) c += op != Op::kMatch;
    return c;
  }

 private:
  bool search(int i, int j, int budget) {
    if (i == 0 && j == 0) return true;
    if (budget < std::abs(i - j)) return false;
    if (i > 0 && j > 0 && ref_[i - 1] == hyp_[j - 1]) {
      path_.push_back(Op::kMatch);
      if (search(i - 1, j - 1, budget)) return true;
      path_.pop_back();
    }
    if (budget == 0) return false;
    if (i > 0 && j > 0 && ref_[i - 1] != hyp_[j - 1]) {
      path_.push_back(Op::kSub);
      if (search(i - 1, j - 1, budget - 1)) return true;
      path_.pop_back();
    }
    if (i > 0) {
      path_.push_back(Op::kDel);
      if (search(i - 1, j, budget - 1)) return true;
      path_.pop_back();
    }
    if (j > 0) {
      path_.push_back(Op::kIns);
      if (search(i, j - 1, budget - 1)) return true;
      path_.pop_back();
    }
    return false;
  }

  const std::vector<TokenId>& ref_;
  const std::vector<TokenId>& hyp_;
  std::vector<Op> path_;
};

// Every output of the channel for `input` with its total probability,
// by explicit expansion of each per-word branch.
inline std::map<std::vector<TokenId>, double> enumerate_channel(
    const std::vector<TokenId>& input, const ChannelModel& channel) {
  std::map<std::vector<TokenId>, double> out;
  std::vector<TokenId> partial;
  std::function<void(std::size_t, double)> expand = [&](std::size_t i,
                                                        double p) {
    if (p == 0.0) return;
    if (i == input.size()) {
      out[partial] += p;
      return;
    }
    const TokenId x = input[i];
    const TokenId prev = i == 0 ? kBos : input[i - 1];
    const double rho = channel.rho(x, prev);
    const double del = channel.word(x).del;
    const double ins = channel.insertion_prob();

    auto after_word = [&](double q) {
      expand(i + 1, q * (1.0 - ins));
      for (const auto& ww : channel.insertion_distribution()) {
        partial.push_back(ww.word);
        expand(i + 1, q * ins * ww.prob);
        partial.pop_back();
      }
    };
    after_word(p * del);
    partial.push_back(x);
    after_word(p * (1.0 - rho - del));
    partial.pop_back();
    for (const auto& c : channel.word(x).confusions) {
      partial.push_back(c.word);
      after_word(p * rho * c.prob);
      partial.pop_back();
    }
  };
  expand(0, 1.0);
  return out;
}

// Calls fn(ref, hyp) for every pair with |ref|, |hyp| <= max_len over a
// `symbols`-word alphabet, up to bijective relabeling of the words: the
// concatenation ref ++ hyp is enumerated in first-occurrence normal form.
// `first_id` is the id of symbol 0. Returns the number of pairs visited.
template <typename Fn>
long for_each_canonical_pair(int max_len, int symbols, TokenId first_id,
                             Fn&& fn) {
  long visited = 0;
  std::vector<TokenId> joint;
  std::function<void(int, int, int)> extend = [&](int n, int total,
                                                  int used) {
    if (static_cast<int>(joint.size()) == total) {
      std::vector<TokenId> ref(joint.begin(), joint.begin() + n);
      std::vector<TokenId> hyp(joint.begin() + n, joint.end());
      fn(ref, hyp);
      ++visited;
      return;
    }
    const int limit = std::min(used + 1, symbols);
    for (int s = 0; s < limit; ++s) {
      joint.push_back(first_id + s);
      extend(n, total, std::max(used, s + 1));
      joint.pop_back();
    }
  };
  for (int n = 0; n <= max_len; ++n) {
    for (int m = 0; m <= max_len; ++m) extend(n, n + m, 0);
  }
  return visited;
}

}  // namespace cflm::oracle

#endif  // CFLM_TESTS_ORACLES_H_
