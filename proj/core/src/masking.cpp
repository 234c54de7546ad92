#include "phasor/masking.hpp"

#include <map>
#include <optional>
#include <string>

#include "phasor/error.hpp"

namespace phasor {

std::string_view to_string(Polarity p) {
  switch (p) {
    case Polarity::Positive:
      return "pos";
    case Polarity::Negative:
      return "neg";
    case Polarity::Neutral:
      return "neu";
  }
  return "?";
}

Polarity parse_polarity(std::string_view s) {
  if (s == "pos") return Polarity::Positive;
  if (s == "neg") return Polarity::Negative;
  if (s == "neu") return Polarity::Neutral;
  throw FormatError("unknown polarity '" + std::string(s) + "' (expected pos|neg|neu)");
}

MaskMatrix build_anticollision_mask(std::span<const SemanticLabel> labels) {
  MaskMatrix m(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    for (std::size_t j = 0; j < labels.size(); ++j) m.set(i, j, labels[i] == labels[j]);
  }
  return m;
}

MaskMatrix identity_mask(std::size_t n) {
  MaskMatrix m(n);
  for (std::size_t i = 0; i < n; ++i) m.set(i, i, true);
  return m;
}

std::vector<PairIndex> build_pair_index(std::span<const SemanticLabel> labels,
                                        std::span<const RoleAnnotation> roles) {
  if (labels.size() != roles.size()) {
    throw DimensionError("build_pair_index: labels and roles differ in length");
  }
  struct Group {
    std::optional<std::size_t> query;
    std::optional<std::size_t> positive;
    std::vector<std::size_t> negatives;
  };
  std::vector<std::size_t> order;
  std::map<std::size_t, Group> groups;
  for (std::size_t i = 0; i < roles.size(); ++i) {
    auto [it, inserted] = groups.try_emplace(roles[i].triplet);
    if (inserted) order.push_back(roles[i].triplet);
    Group& g = it->second;
    const std::string where = "triplet " + std::to_string(roles[i].triplet);
    switch (roles[i].role) {
      case TripletRole::Query:
        if (g.query) throw DataIntegrityError(where + " has more than one query");
        g.query = i;
        break;
      case TripletRole::Positive:
        if (g.positive) throw DataIntegrityError(where + " has more than one positive");
        g.positive = i;
        break;
      case TripletRole::Negative:
        g.negatives.push_back(i);
        break;
    }
  }

  std::vector<PairIndex> pairs;
  pairs.reserve(order.size());
  for (std::size_t id : order) {
    const Group& g = groups.at(id);
    const std::string where = "triplet " + std::to_string(id);
    if (!g.query || !g.positive) throw DataIntegrityError(where + " lacks a query or positive");
    if (g.negatives.empty()) throw DataIntegrityError(where + " has no negative");
    const SemanticLabel& q = labels[*g.query];
    if (labels[*g.positive] != q) {
      throw DataIntegrityError(where + ": positive does not share the query's aspect and polarity");
    }
    for (std::size_t n : g.negatives) {
      if (labels[n].aspect != q.aspect) {
        throw DataIntegrityError(where + ": negative " + std::to_string(n) +
                                 " has a different aspect than the query");
      }
      if (labels[n].polarity == q.polarity) {
        throw DataIntegrityError(where + ": negative " + std::to_string(n) +
                                 " has the query's polarity");
      }
    }
    pairs.push_back({*g.query, *g.positive, g.negatives});
  }
  return pairs;
}

}  // namespace phasor
