#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "cmsent/label.hpp"

namespace cmsent {

enum class Origin { en, es, cm, unknown };

std::string_view origin_name(Origin o);
/// Throws ConfigError for anything but en, es, cm, unknown.
Origin parse_origin(std::string_view s);

struct LabeledExample {
  std::string id;
  std::string raw_text;
  std::vector<std::string> tokens;
  Label label = Label::neutral;
  Origin origin = Origin::unknown;
};

struct DatasetSplit {
  std::vector<LabeledExample> train;
  std::vector<LabeledExample> validation;
  std::vector<LabeledExample> test;
};

/// Tweet tokenizer. Rules, in order: URLs become "<url>"; @mentions and
/// #hashtags stay whole; emoticons from the shipped inventory stay intact
/// and keep their case; everything else is lowercased, punctuation is split
/// into single-character tokens and whitespace is collapsed.
std::vector<std::string> tokenize_tweet(std::string_view text);

/// The emoticon inventory compiled from data/emoticons.txt.
const std::vector<std::string>& emoticon_inventory();

/// Reads "id<TAB>label<TAB>text" lines. Errors name the 1-based row.
std::vector<LabeledExample> load_dataset(const std::filesystem::path& path, Origin origin);

/// Writes the same TSV format, using raw_text as the text column.
void save_dataset(std::span<const LabeledExample> examples, const std::filesystem::path& path);

/// Label-stratified split into (train, validation). Per label, round(n * val_fraction)
/// examples go to validation. Both halves keep input order.
std::pair<std::vector<LabeledExample>, std::vector<LabeledExample>> make_splits(
    std::span<const LabeledExample> examples, double val_fraction, std::uint64_t seed);

/// Throws Error if any id appears in more than one part of the split.
void check_disjoint(const DatasetSplit& split);

std::vector<Label> labels_of(std::span<const LabeledExample> examples);

}  // namespace cmsent
