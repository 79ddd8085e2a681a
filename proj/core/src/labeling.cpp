#include "portraitgen/labeling.h"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <limits>

#include "portraitgen/data_paths.h"
#include "portraitgen/error.h"

namespace portraitgen::labeling {

namespace {

constexpr std::array<std::string_view, 6> kTriggerWords = {
    "a boy, children",  "a girl, children",   //
    "a handsome man",   "a beautiful woman",  //
    "a mature man",     "a mature woman",
};

std::size_t trigger_index(Gender gender, AgeGroup age) {
    return static_cast<std::size_t>(age) * 2 + static_cast<std::size_t>(gender);
}

// Order-independent sum: sorting first makes the result bit-identical under permutation.
double stable_sum(std::vector<double> values) {
    std::sort(values.begin(), values.end());
    double s = 0.0;
    for (double v : values) {
        s += v;
    }
    return s;
}

}  // namespace

std::string normalize_tag(std::string_view tag) {
    std::string out;
    out.reserve(tag.size());
    bool space = false;
    for (unsigned char c : tag) {
        if (std::isspace(c) || c == '_') {
            space = !out.empty();
            continue;
        }
        if (space) {
            out.push_back(' ');
            space = false;
        }
        out.push_back(static_cast<char>(std::tolower(c)));
    }
    return out;
}

TagSet::TagSet(std::initializer_list<std::string> tags) {
    for (const auto& t : tags) {
        add(t);
    }
}

TagSet::TagSet(std::span<const std::string> tags) {
    for (const auto& t : tags) {
        add(t);
    }
}

bool TagSet::add(std::string_view tag) {
    auto norm = normalize_tag(tag);
    if (norm.empty() || contains(norm)) {
        return false;
    }
    tags_.push_back(std::move(norm));
    return true;
}

bool TagSet::contains(std::string_view tag) const {
    return std::find(tags_.begin(), tags_.end(), tag) != tags_.end();
}

TagSet load_denylist(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw Error(ErrorCode::not_found, "cannot open denylist " + path.string());
    }
    TagSet deny;
    std::string line;
    while (std::getline(in, line)) {
        const auto first = line.find_first_not_of(" \t\r");
        if (first == std::string::npos || line[first] == '#') {
            continue;
        }
        deny.add(line);
    }
    return deny;
}

TagSet default_denylist() { return load_denylist(data_dir() / "identity_denylist.txt"); }

bool matches_denylist(std::string_view tag, const TagSet& denylist) {
    const auto norm = normalize_tag(tag);
    for (const auto& entry : denylist.tags()) {
        if (norm == entry) {
            return true;
        }
        if (norm.size() > entry.size() && norm.ends_with(entry) && norm[norm.size() - entry.size() - 1] == ' ') {
            return true;
        }
    }
    return false;
}

TagSet prune_identity_tags(const TagSet& tags, const TagSet& denylist) {
    TagSet out;
    for (const auto& t : tags.tags()) {
        if (!matches_denylist(t, denylist)) {
            out.add(t);
        }
    }
    return out;
}

void AttributePrediction::validate() const {
    auto check = [](std::span<const double> probs, const char* what) {
        double sum = 0.0;
        for (double p : probs) {
            if (!std::isfinite(p) || p < 0.0) {
                throw Error(ErrorCode::invalid_input, std::string(what) + " has a negative or non-finite entry");
            }
            sum += p;
        }
        if (std::abs(sum - 1.0) > 1e-6) {
            throw Error(ErrorCode::invalid_input, std::string(what) + " does not sum to 1");
        }
    };
    check(gender_probs, "gender_probs");
    if (age_probs.empty()) {
        throw Error(ErrorCode::invalid_input, "age_probs is empty");
    }
    check(age_probs, "age_probs");
    if (age_bin_edges.size() != age_probs.size() + 1) {
        throw Error(ErrorCode::invalid_input, "age_bin_edges must have one more entry than age_probs");
    }
    for (std::size_t i = 0; i + 1 < age_bin_edges.size(); ++i) {
        if (!std::isfinite(age_bin_edges[i + 1]) || !(age_bin_edges[i] < age_bin_edges[i + 1])) {
            throw Error(ErrorCode::invalid_input, "age_bin_edges must be finite and strictly increasing");
        }
    }
}

std::vector<double> default_age_bin_edges() { return {0, 3, 10, 20, 30, 40, 50, 60, 70, 80}; }

AgeGroup age_group_for(double age) {
    if (!std::isfinite(age) || age < 0.0) {
        throw Error(ErrorCode::invalid_input, "age must be finite and non-negative");
    }
    if (age < 20.0) {
        return AgeGroup::child;
    }
    if (age < 40.0) {
        return AgeGroup::adult;
    }
    return AgeGroup::mature;
}

TriggerWord::TriggerWord(Gender gender, AgeGroup age)
    : gender_(gender), age_(age), text_(kTriggerWords[trigger_index(gender, age)]) {}

TriggerWord TriggerWord::parse(std::string_view text) {
    for (auto age : {AgeGroup::child, AgeGroup::adult, AgeGroup::mature}) {
        for (auto gender : {Gender::male, Gender::female}) {
            if (kTriggerWords[trigger_index(gender, age)] == text) {
                return TriggerWord(gender, age);
            }
        }
    }
    throw Error(ErrorCode::invalid_input, "unknown trigger word: " + std::string(text));
}

std::span<const std::string_view> trigger_word_table() { return kTriggerWords; }

AggregatedAttributes aggregate_attributes(std::span<const AttributePrediction> predictions) {
    if (predictions.empty()) {
        throw Error(ErrorCode::invalid_input, "no attribute predictions to aggregate");
    }
    for (const auto& p : predictions) {
        p.validate();
        if (p.age_bin_edges != predictions.front().age_bin_edges) {
            throw Error(ErrorCode::invalid_input, "attribute predictions use different age bins");
        }
    }
    const auto n = static_cast<double>(predictions.size());
    AggregatedAttributes agg;
    for (std::size_t g = 0; g < 2; ++g) {
        std::vector<double> column;
        for (const auto& p : predictions) {
            column.push_back(p.gender_probs[g]);
        }
        agg.gender_probs[g] = stable_sum(std::move(column)) / n;
    }
    const auto& edges = predictions.front().age_bin_edges;
    const auto bins = predictions.front().age_probs.size();
    agg.age_probs.resize(bins);
    std::vector<double> weighted;
    for (std::size_t b = 0; b < bins; ++b) {
        std::vector<double> column;
        for (const auto& p : predictions) {
            column.push_back(p.age_probs[b]);
        }
        agg.age_probs[b] = stable_sum(std::move(column)) / n;
        weighted.push_back(agg.age_probs[b] * 0.5 * (edges[b] + edges[b + 1]));
    }
    agg.gender = agg.gender_probs[1] > agg.gender_probs[0] ? Gender::female : Gender::male;
    agg.expected_age = stable_sum(std::move(weighted));
    return agg;
}

TriggerWord select_trigger_word(std::span<const AttributePrediction> predictions) {
    const auto agg = aggregate_attributes(predictions);
    return TriggerWord(agg.gender, age_group_for(agg.expected_age));
}

std::string assemble_caption(const TriggerWord& trigger, const TagSet& tags) {
    std::string caption = trigger.text();
    for (const auto& t : tags.tags()) {
        caption += ", ";
        caption += t;
    }
    return caption;
}

}  // namespace portraitgen::labeling
