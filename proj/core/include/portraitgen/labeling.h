#pragma once

#include <array>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace portraitgen::labeling {

/// Ordered, lowercase, deduplicated tags. Empty strings are dropped.
class TagSet {
public:
    TagSet() = default;
    TagSet(std::initializer_list<std::string> tags);
    explicit TagSet(std::span<const std::string> tags);

    /// Appends after normalization; returns false if the tag was empty or already present.
    bool add(std::string_view tag);
    bool contains(std::string_view tag) const;

    const std::vector<std::string>& tags() const { return tags_; }
    std::size_t size() const { return tags_.size(); }
    bool empty() const { return tags_.empty(); }

    friend bool operator==(const TagSet&, const TagSet&) = default;

private:
    std::vector<std::string> tags_;
};

std::string normalize_tag(std::string_view tag);

/// Identity-bound tag denylist; one tag per line, '#' comments allowed.
TagSet load_denylist(const std::filesystem::path& path);
TagSet default_denylist();

/// True when the tag is a denylist entry or ends with " <entry>" (head-noun match).
bool matches_denylist(std::string_view tag, const TagSet& denylist);

TagSet prune_identity_tags(const TagSet& tags, const TagSet& denylist);

enum class Gender { male = 0, female = 1 };
enum class AgeGroup { child, adult, mature };

/// Gender and age probabilities for one image. Age bin i spans
/// [age_bin_edges[i], age_bin_edges[i + 1]).
struct AttributePrediction {
    std::array<double, 2> gender_probs{0.5, 0.5};  // (male, female)
    std::vector<double> age_probs;
    std::vector<double> age_bin_edges;

    /// Throws invalid-input on negative entries, sums off by more than 1e-6, or bad edges.
    void validate() const;
};

/// FairFace age buckets: 0-2, 3-9, 10-19, 20-29, 30-39, 40-49, 50-59, 60-69, 70+
/// (the open bucket is closed at 80 for the expectation).
std::vector<double> default_age_bin_edges();

/// [0,20) child, [20,40) adult, [40,inf) mature.
AgeGroup age_group_for(double age);

class TriggerWord {
public:
    TriggerWord(Gender gender, AgeGroup age);
    /// Throws invalid-input when text is not one of the six trigger words.
    static TriggerWord parse(std::string_view text);

    const std::string& text() const { return text_; }
    Gender gender() const { return gender_; }
    AgeGroup age_group() const { return age_; }

    friend bool operator==(const TriggerWord& a, const TriggerWord& b) { return a.text_ == b.text_; }

private:
    Gender gender_;
    AgeGroup age_;
    std::string text_;
};

/// All six trigger words, row-major over (child, adult, mature) x (male, female).
std::span<const std::string_view> trigger_word_table();

struct AggregatedAttributes {
    std::array<double, 2> gender_probs{};
    std::vector<double> age_probs;
    Gender gender = Gender::male;
    double expected_age = 0.0;
};

/// Element-wise average of the per-image probabilities, then argmax gender
/// (ties toward male) and probability-weighted bin-midpoint age.
AggregatedAttributes aggregate_attributes(std::span<const AttributePrediction> predictions);

TriggerWord select_trigger_word(std::span<const AttributePrediction> predictions);

std::string assemble_caption(const TriggerWord& trigger, const TagSet& tags);

}  // namespace portraitgen::labeling
