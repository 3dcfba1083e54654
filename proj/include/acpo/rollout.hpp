#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace acpo {

using TokenId = std::uint32_t;

enum class Difficulty { Easy, Middle, Difficult };

const char* to_string(Difficulty d);
Difficulty difficulty_from_string(const std::string& s);

struct Query {
  std::string id;
  std::vector<TokenId> prompt_tokens;
  Difficulty difficulty = Difficulty::Easy;
  std::vector<TokenId> target;

  bool operator==(const Query&) const = default;
};

struct Response {
  std::vector<TokenId> tokens;
  // log pi_old(token | query, prefix), one per token, recorded at sampling time
  std::vector<double> old_logprobs;
  double reward = 0.0;

  bool operator==(const Response&) const = default;
};

// One query and the G responses sampled for it from a single snapshot.
struct RolloutGroup {
  Query query;
  std::vector<Response> responses;

  bool operator==(const RolloutGroup&) const = default;
};

struct Batch {
  std::vector<RolloutGroup> groups;
  std::int64_t step = 0;
  std::string snapshot_id;

  bool operator==(const Batch&) const = default;

  std::size_t token_count() const;
  std::size_t response_count() const;
};

// Per-token scalars laid out as [group][response][token], aligned with a Batch.
using PerToken = std::vector<std::vector<std::vector<double>>>;

// Zero-filled tensor shaped like the batch's responses.
PerToken zeros_like(const Batch& batch);
bool same_shape(const PerToken& values, const Batch& batch);

// Result of validate_batch: empty optional means the batch is well formed.
struct ValidationError {
  std::string message;
};

std::optional<ValidationError> validate_batch(const Batch& batch,
                                              std::size_t vocab_size) noexcept;

class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Line-delimited JSON, one group per line. Each record carries the batch
// step and snapshot_id; reals use 17 significant digits.
void write_batch(std::ostream& out, const Batch& batch);
Batch read_batch(std::istream& in);

// Task dumps share the record layout but omit responses.
void write_queries(std::ostream& out, const std::vector<Query>& queries);
std::vector<Query> read_queries(std::istream& in);

std::string format_real(double value);

}  // namespace acpo
