#pragma once

#include <algorithm>
#include <cctype>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "ovmm/errors.hpp"

namespace ovmm {

using json = nlohmann::ordered_json;

struct ParsedInstruction {
  std::string target_object;
  std::optional<std::string> region_hint;

  bool operator==(const ParsedInstruction&) const = default;
};

// Deterministic (object label, region name) -> relevance score table; unseen
// pairs score 0.
class AffinityTable {
public:
  AffinityTable() = default;

  void set(const std::string& object, const std::string& region, double score) {
    if (score < 0.0 || score > 1.0) throw InputError("affinity score out of [0,1]");
    scores_[object][region] = score;
  }

  double get(const std::string& object, const std::string& region) const {
    auto obj = scores_.find(object);
    if (obj == scores_.end()) return 0.0;
    auto reg = obj->second.find(region);
    return reg == obj->second.end() ? 0.0 : reg->second;
  }

  const std::map<std::string, std::map<std::string, double>>& entries() const { return scores_; }

  json to_json() const {
    json out = json::object();
    for (const auto& [object, regions] : scores_) {
      json row = json::object();
      for (const auto& [region, score] : regions) row[region] = score;
      out[object] = row;
    }
    return out;
  }

  static AffinityTable from_json(const json& j) {
    AffinityTable table;
    for (const auto& [object, row] : j.items()) {
      for (const auto& [region, score] : row.items()) {
        table.set(object, region, score.get<double>());
      }
    }
    return table;
  }

private:
  std::map<std::string, std::map<std::string, double>> scores_;
};

// ---- Wire protocol -------------------------------------------------------
//
// Request/response JSON bodies exchanged with the semantic backends. The mock
// backend speaks the exact same shapes so golden tests run offline.

inline std::string encode_propose_request(const std::vector<std::string>& objects,
                                          const std::vector<std::string>& candidates) {
  json body;
  body["objects"] = objects;
  body["region_candidates"] = candidates;
  return body.dump();
}

inline std::string encode_propose_response(const std::vector<std::string>& proposals) {
  json body;
  body["region_proposals"] = proposals;
  return body.dump();
}

inline std::string encode_prioritize_request(const std::vector<std::string>& regions,
                                             const std::string& target) {
  json body;
  body["regions"] = regions;
  body["target_object"] = target;
  return body.dump();
}

inline std::string encode_prioritize_response(const std::vector<std::string>& ordered) {
  json body;
  body["ordered_regions"] = ordered;
  return body.dump();
}

inline std::string encode_parse_response(const ParsedInstruction& parsed) {
  json body;
  body["target_object"] = parsed.target_object;
  if (parsed.region_hint) {
    body["region"] = *parsed.region_hint;
  } else {
    body["region"] = nullptr;
  }
  return body.dump();
}

// Models occasionally wrap replies in markdown fences despite instructions.
inline std::string strip_markdown_fences(const std::string& text) {
  std::size_t begin = text.find_first_not_of(" \t\r\n");
  if (begin == std::string::npos) return "";
  std::size_t end = text.find_last_not_of(" \t\r\n") + 1;
  std::string body = text.substr(begin, end - begin);
  if (body.starts_with("```")) {
    std::size_t line_end = body.find('\n');
    if (line_end != std::string::npos) body = body.substr(line_end + 1);
    if (body.ends_with("```")) body = body.substr(0, body.size() - 3);
    while (!body.empty() && (body.back() == '\n' || body.back() == '\r')) body.pop_back();
  }
  return body;
}

inline json parse_backend_json(const std::string& text) {
  const std::string clean = strip_markdown_fences(text);
  json parsed = json::parse(clean, nullptr, false);
  if (parsed.is_discarded()) throw BackendError("backend reply is not valid JSON: " + text);
  return parsed;
}

inline bool is_permutation_of(const std::vector<std::string>& output,
                              const std::vector<std::string>& input) {
  if (output.size() != input.size()) return false;
  std::vector<std::string> a = output, b = input;
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  return a == b;
}

inline std::vector<std::string> decode_region_list(const json& body, const std::string& key,
                                                   const std::vector<std::string>& expected) {
  if (!body.contains(key) || !body[key].is_array()) {
    throw BackendError("backend reply missing array field '" + key + "'");
  }
  std::vector<std::string> out;
  for (const auto& item : body[key]) {
    if (!item.is_string()) throw BackendError("backend reply: non-string region name");
    out.push_back(item.get<std::string>());
  }
  if (!is_permutation_of(out, expected)) {
    throw BackendError("backend reply is not a permutation of the candidates");
  }
  return out;
}

inline ParsedInstruction decode_parse_response(const json& body) {
  if (!body.contains("target_object") || !body["target_object"].is_string()) {
    throw BackendError("backend reply missing 'target_object'");
  }
  ParsedInstruction parsed;
  parsed.target_object = body["target_object"].get<std::string>();
  if (parsed.target_object.empty()) throw BackendError("backend reply: empty target_object");
  if (body.contains("region") && body["region"].is_string()) {
    parsed.region_hint = body["region"].get<std::string>();
  }
  return parsed;
}

// ---- Capability interfaces ----------------------------------------------

class InstructionParser {
public:
  virtual ~InstructionParser() = default;
  virtual ParsedInstruction parse_instruction(const std::string& text) = 0;
};

class RegionProposer {
public:
  virtual ~RegionProposer() = default;
  // Returns candidates ordered by decreasing likelihood.
  virtual std::vector<std::string> propose_regions(const std::vector<std::string>& objects,
                                                   const std::vector<std::string>& candidates) = 0;
};

class RegionPrioritizer {
public:
  virtual ~RegionPrioritizer() = default;
  virtual std::vector<std::string> prioritize_regions(const std::vector<std::string>& regions,
                                                      const std::string& target) = 0;
};

struct ApprovalVerdict {
  bool accepted = false;
  double confidence = 0.0;
};

class DetectionApprover {
public:
  virtual ~DetectionApprover() = default;
  virtual ApprovalVerdict approve_detection(const std::string& evidence,
                                            const std::string& claimed_label) = 0;
};

// ---- Hint re-prioritization ---------------------------------------------

inline std::string to_lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

// Moves the hinted region to the front (case-insensitive exact match); on no
// match the order is unchanged and *warning is set.
inline std::vector<std::string> reprioritize(std::vector<std::string> ordered,
                                             const std::string& hint,
                                             std::string* warning = nullptr) {
  const std::string needle = to_lower(hint);
  for (std::size_t i = 0; i < ordered.size(); ++i) {
    if (to_lower(ordered[i]) == needle) {
      std::string match = std::move(ordered[i]);
      ordered.erase(ordered.begin() + static_cast<std::ptrdiff_t>(i));
      ordered.insert(ordered.begin(), std::move(match));
      return ordered;
    }
  }
  if (warning) *warning = "hint '" + hint + "' does not match any region; order unchanged";
  return ordered;
}

// ---- Offline mock backend ------------------------------------------------

// Pure-function stand-in for the LLM backends: affinity-table scoring plus
// lexicon keyword extraction. Identical inputs always produce identical
// outputs, which makes it the reference backend for tests.
class MockBackend : public InstructionParser, public RegionProposer, public RegionPrioritizer {
public:
  MockBackend(AffinityTable affinity, std::vector<std::string> object_lexicon,
              std::vector<std::string> region_lexicon)
      : affinity_(std::move(affinity)), object_lexicon_(std::move(object_lexicon)),
        region_lexicon_(std::move(region_lexicon)) {}

  ParsedInstruction parse_instruction(const std::string& text) override {
    if (text.empty()) throw InputError("parse_instruction: empty instruction");
    const std::string lowered = to_lower(text);
    ParsedInstruction parsed;
    parsed.target_object = longest_match(lowered, object_lexicon_);
    if (parsed.target_object.empty()) {
      // Unknown object: fall back to the words following a fetch verb.
      parsed.target_object = tail_after_article(lowered);
    }
    const std::string region = longest_match(lowered, region_lexicon_);
    if (!region.empty()) parsed.region_hint = region;
    return parsed;
  }

  // Rank = descending sum of affinities over the given objects; ties keep
  // candidate input order.
  std::vector<std::string> propose_regions(const std::vector<std::string>& objects,
                                           const std::vector<std::string>& candidates) override {
    if (objects.empty() || candidates.empty()) {
      throw InputError("propose_regions: empty objects or candidates");
    }
    return sort_by_score(candidates, [&](const std::string& region) {
      double total = 0.0;
      for (const std::string& object : objects) total += affinity_.get(object, region);
      return total;
    });
  }

  std::vector<std::string> prioritize_regions(const std::vector<std::string>& regions,
                                              const std::string& target) override {
    if (regions.empty()) throw InputError("prioritize_regions: empty region list");
    return sort_by_score(regions,
                         [&](const std::string& region) { return affinity_.get(target, region); });
  }

  const AffinityTable& affinity() const { return affinity_; }

  // Wire-level entry points used by the protocol golden tests.
  std::string handle_propose_request(const std::string& request_body) {
    const json body = parse_backend_json(request_body);
    std::vector<std::string> objects = body.at("objects").get<std::vector<std::string>>();
    std::vector<std::string> candidates =
        body.at("region_candidates").get<std::vector<std::string>>();
    return encode_propose_response(propose_regions(objects, candidates));
  }

  std::string handle_prioritize_request(const std::string& request_body) {
    const json body = parse_backend_json(request_body);
    std::vector<std::string> regions = body.at("regions").get<std::vector<std::string>>();
    const std::string target = body.at("target_object").get<std::string>();
    return encode_prioritize_response(prioritize_regions(regions, target));
  }

  std::string handle_parse_request(const std::string& instruction) {
    return encode_parse_response(parse_instruction(instruction));
  }

private:
  template <typename Score>
  static std::vector<std::string> sort_by_score(const std::vector<std::string>& items,
                                                Score&& score) {
    std::vector<std::pair<double, std::size_t>> keyed;
    keyed.reserve(items.size());
    for (std::size_t i = 0; i < items.size(); ++i) keyed.emplace_back(score(items[i]), i);
    std::stable_sort(keyed.begin(), keyed.end(),
                     [](const auto& a, const auto& b) { return a.first > b.first; });
    std::vector<std::string> out;
    out.reserve(items.size());
    for (const auto& [s, i] : keyed) out.push_back(items[i]);
    return out;
  }

  static std::string longest_match(const std::string& lowered_text,
                                   const std::vector<std::string>& lexicon) {
    std::string best;
    for (const std::string& term : lexicon) {
      if (term.size() > best.size() && lowered_text.find(to_lower(term)) != std::string::npos) {
        best = term;
      }
    }
    return best;
  }

  static std::string tail_after_article(const std::string& lowered_text) {
    for (const std::string& marker : {std::string(" the "), std::string(" a "), std::string(" an ")}) {
      const std::size_t pos = lowered_text.find(marker);
      if (pos == std::string::npos) continue;
      std::string tail = lowered_text.substr(pos + marker.size());
      const std::size_t cut = tail.find_first_of(".,!?");
      if (cut != std::string::npos) tail = tail.substr(0, cut);
      while (!tail.empty() && tail.back() == ' ') tail.pop_back();
      if (!tail.empty()) return tail;
    }
    return lowered_text;
  }

  AffinityTable affinity_;
  std::vector<std::string> object_lexicon_;
  std::vector<std::string> region_lexicon_;
};

// Bernoulli approver used by mission simulation; accept probabilities differ
// for genuine and spurious proposals.
struct SimulatedApprover {
  double true_accept_rate = 1.0;
  double false_accept_rate = 0.0;

  template <typename RngT>
  ApprovalVerdict approve(bool genuine, RngT& rng) const {
    const double p = genuine ? true_accept_rate : false_accept_rate;
    ApprovalVerdict verdict;
    verdict.accepted = rng.bernoulli(p);
    verdict.confidence = p;
    return verdict;
  }
};

}  // namespace ovmm
