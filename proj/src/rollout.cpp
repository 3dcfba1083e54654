#include "acpo/rollout.hpp"

#include <cmath>
#include <cstdio>
#include <istream>
#include <ostream>
#include <sstream>

#include "json.hpp"

namespace acpo {

namespace {

using nlohmann::json;

std::string group_prefix(std::size_t g) {
  return "group " + std::to_string(g);
}

std::string location(std::size_t g, std::size_t r) {
  return group_prefix(g) + ", response " + std::to_string(r);
}

void write_tokens(std::ostream& out, const std::vector<TokenId>& tokens) {
  out << '[';
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i) out << ',';
    out << tokens[i];
  }
  out << ']';
}

void write_reals(std::ostream& out, const std::vector<double>& values) {
  out << '[';
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i) out << ',';
    out << format_real(values[i]);
  }
  out << ']';
}

void write_query_fields(std::ostream& out, const Query& q) {
  out << "\"id\":" << json(q.id).dump() << ",\"prompt_tokens\":";
  write_tokens(out, q.prompt_tokens);
  out << ",\"difficulty\":\"" << to_string(q.difficulty) << "\",\"target\":";
  write_tokens(out, q.target);
}

std::vector<TokenId> tokens_from(const json& j, const char* key) {
  std::vector<TokenId> out;
  for (const auto& v : j.at(key)) out.push_back(v.get<TokenId>());
  return out;
}

Query query_from(const json& j) {
  Query q;
  q.id = j.at("id").get<std::string>();
  q.prompt_tokens = tokens_from(j, "prompt_tokens");
  q.difficulty = difficulty_from_string(j.at("difficulty").get<std::string>());
  q.target = tokens_from(j, "target");
  return q;
}

json parse_line(const std::string& line, std::size_t line_no) {
  try {
    return json::parse(line);
  } catch (const json::exception& e) {
    throw FormatError("line " + std::to_string(line_no) + ": " + e.what());
  }
}

}  // namespace

const char* to_string(Difficulty d) {
  switch (d) {
    case Difficulty::Easy: return "Easy";
    case Difficulty::Middle: return "Middle";
    case Difficulty::Difficult: return "Difficult";
  }
  return "?";
}

Difficulty difficulty_from_string(const std::string& s) {
  if (s == "Easy") return Difficulty::Easy;
  if (s == "Middle") return Difficulty::Middle;
  if (s == "Difficult") return Difficulty::Difficult;
  throw FormatError("unknown difficulty '" + s + "'");
}

std::size_t Batch::token_count() const {
  std::size_t n = 0;
  for (const auto& g : groups)
    for (const auto& r : g.responses) n += r.tokens.size();
  return n;
}

std::size_t Batch::response_count() const {
  std::size_t n = 0;
  for (const auto& g : groups) n += g.responses.size();
  return n;
}

PerToken zeros_like(const Batch& batch) {
  PerToken out(batch.groups.size());
  for (std::size_t g = 0; g < batch.groups.size(); ++g) {
    const auto& responses = batch.groups[g].responses;
    out[g].resize(responses.size());
    for (std::size_t r = 0; r < responses.size(); ++r)
      out[g][r].assign(responses[r].tokens.size(), 0.0);
  }
  return out;
}

bool same_shape(const PerToken& values, const Batch& batch) {
  if (values.size() != batch.groups.size()) return false;
  for (std::size_t g = 0; g < values.size(); ++g) {
    const auto& responses = batch.groups[g].responses;
    if (values[g].size() != responses.size()) return false;
    for (std::size_t r = 0; r < responses.size(); ++r)
      if (values[g][r].size() != responses[r].tokens.size()) return false;
  }
  return true;
}

std::optional<ValidationError> validate_batch(const Batch& batch,
                                              std::size_t vocab_size) noexcept {
  try {
    if (batch.groups.empty()) return ValidationError{"batch has no groups"};
    const std::size_t group_size = batch.groups.front().responses.size();
    for (std::size_t g = 0; g < batch.groups.size(); ++g) {
      const auto& group = batch.groups[g];
      const auto& q = group.query;
      if (q.prompt_tokens.empty())
        return ValidationError{"empty prompt at " + group_prefix(g)};
      if (q.target.empty())
        return ValidationError{"empty target at " + group_prefix(g)};
      for (auto t : q.prompt_tokens)
        if (t >= vocab_size)
          return ValidationError{"prompt token out of range at " + group_prefix(g)};
      for (auto t : q.target)
        if (t >= vocab_size)
          return ValidationError{"target token out of range at " + group_prefix(g)};
      if (group.responses.size() < 2)
        return ValidationError{"group size < 2 at " + group_prefix(g)};
      if (group.responses.size() != group_size)
        return ValidationError{"group size differs from group 0 at " + group_prefix(g)};
      for (std::size_t r = 0; r < group.responses.size(); ++r) {
        const auto& resp = group.responses[r];
        if (resp.tokens.empty())
          return ValidationError{"empty response at " + location(g, r)};
        if (resp.tokens.size() != resp.old_logprobs.size())
          return ValidationError{"logprob count mismatch at " + location(g, r)};
        if (!std::isfinite(resp.reward))
          return ValidationError{"non-finite reward at " + location(g, r)};
        for (std::size_t t = 0; t < resp.tokens.size(); ++t) {
          const std::string where = location(g, r) + ", token " + std::to_string(t);
          if (resp.tokens[t] >= vocab_size)
            return ValidationError{"token out of range at " + where};
          const double lp = resp.old_logprobs[t];
          if (std::isnan(lp)) return ValidationError{"logprob is NaN at " + where};
          if (lp > 0.0) return ValidationError{"logprob > 0 at " + where};
        }
      }
    }
    return std::nullopt;
  } catch (...) {
    return ValidationError{"validation failed: allocation error"};
  }
}

std::string format_real(double value) {
  if (std::isnan(value)) return "NaN";
  if (std::isinf(value)) return value > 0 ? "Infinity" : "-Infinity";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", value);
  return buf;
}

void write_batch(std::ostream& out, const Batch& batch) {
  for (const auto& group : batch.groups) {
    out << '{';
    write_query_fields(out, group.query);
    out << ",\"responses\":[";
    for (std::size_t r = 0; r < group.responses.size(); ++r) {
      const auto& resp = group.responses[r];
      if (r) out << ',';
      out << "{\"tokens\":";
      write_tokens(out, resp.tokens);
      out << ",\"old_logprobs\":";
      write_reals(out, resp.old_logprobs);
      out << ",\"reward\":" << format_real(resp.reward) << '}';
    }
    out << "],\"step\":" << batch.step
        << ",\"snapshot_id\":" << json(batch.snapshot_id).dump() << "}\n";
  }
}

Batch read_batch(std::istream& in) {
  Batch batch;
  std::string line;
  std::size_t line_no = 0;
  bool first = true;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const json j = parse_line(line, line_no);
    try {
      RolloutGroup group;
      group.query = query_from(j);
      for (const auto& jr : j.at("responses")) {
        Response resp;
        for (const auto& t : jr.at("tokens")) resp.tokens.push_back(t.get<TokenId>());
        for (const auto& lp : jr.at("old_logprobs"))
          resp.old_logprobs.push_back(lp.get<double>());
        resp.reward = jr.at("reward").get<double>();
        group.responses.push_back(std::move(resp));
      }
      const auto step = j.at("step").get<std::int64_t>();
      auto snapshot = j.at("snapshot_id").get<std::string>();
      if (first) {
        batch.step = step;
        batch.snapshot_id = std::move(snapshot);
        first = false;
      } else if (step != batch.step || snapshot != batch.snapshot_id) {
        throw FormatError("line " + std::to_string(line_no) +
                          ": step/snapshot_id differs from first record");
      }
      batch.groups.push_back(std::move(group));
    } catch (const json::exception& e) {
      throw FormatError("line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return batch;
}

void write_queries(std::ostream& out, const std::vector<Query>& queries) {
  for (const auto& q : queries) {
    out << '{';
    write_query_fields(out, q);
    out << "}\n";
  }
}

std::vector<Query> read_queries(std::istream& in) {
  std::vector<Query> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const json j = parse_line(line, line_no);
    try {
      out.push_back(query_from(j));
    } catch (const json::exception& e) {
      throw FormatError("line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

}  // namespace acpo
