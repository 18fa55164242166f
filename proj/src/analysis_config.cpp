#include "tandem/analysis_config.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

#include "json.hpp"
#include "tandem/text.hpp"

namespace tandem {

std::set<std::string> AnalysisConfig::default_backchannel_lexicon() {
  return {"yeah", "yes",  "yep",   "ok",       "okay",  "right",
          "sure", "mm",   "mmm",   "mmhm",     "mm-hm", "uh-huh",
          "oh",   "ah",   "hm",    "oui",      "ouais", "d'accord",
          "voilà", "exactement"};
}

std::set<std::string> AnalysisConfig::default_filled_pause_lexicon() {
  return {"um", "uh", "er", "erm", "ehm", "hmm", "euh", "bah", "ben", "heu"};
}

void check_config(const AnalysisConfig& config) {
  if (config.merge_gap_ms <= 0) throw std::invalid_argument("merge_gap_ms must be > 0");
  if (config.long_pause_ms <= 0) throw std::invalid_argument("long_pause_ms must be > 0");
  if (config.backchannel_max_ms <= 0) {
    throw std::invalid_argument("backchannel_max_ms must be > 0");
  }
  if (config.backchannel_max_tokens <= 0) {
    throw std::invalid_argument("backchannel_max_tokens must be > 0");
  }
  auto check_lexicon = [](const std::set<std::string>& lexicon, const char* name) {
    if (lexicon.empty()) throw std::invalid_argument(std::string(name) + " is empty");
    for (const auto& word : lexicon) {
      if (word.empty() || word != to_lower(word)) {
        throw std::invalid_argument(std::string(name) + " entry '" + word +
                                    "' is not a lowercase token");
      }
    }
  };
  check_lexicon(config.backchannel_lexicon, "backchannel_lexicon");
  check_lexicon(config.filled_pause_lexicon, "filled_pause_lexicon");
}

AnalysisConfig parse_config(std::string_view json_text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::parse_error& e) {
    throw std::invalid_argument(std::string("config is not valid JSON: ") + e.what());
  }
  if (!doc.is_object()) throw std::invalid_argument("config must be a JSON object");

  AnalysisConfig config;
  auto read_ms = [](const nlohmann::json& v, const std::string& key) {
    if (!v.is_number_integer()) throw std::invalid_argument(key + " must be an integer");
    return v.get<Millis>();
  };
  auto read_lexicon = [](const nlohmann::json& v, const std::string& key) {
    if (!v.is_array()) throw std::invalid_argument(key + " must be an array of strings");
    std::set<std::string> out;
    for (const auto& item : v) {
      if (!item.is_string()) throw std::invalid_argument(key + " must be an array of strings");
      out.insert(to_lower(trim(item.get<std::string>())));
    }
    return out;
  };

  for (const auto& [key, value] : doc.items()) {
    if (key == "merge_gap_ms") {
      config.merge_gap_ms = read_ms(value, key);
    } else if (key == "long_pause_ms") {
      config.long_pause_ms = read_ms(value, key);
    } else if (key == "backchannel_max_ms") {
      config.backchannel_max_ms = read_ms(value, key);
    } else if (key == "backchannel_max_tokens") {
      config.backchannel_max_tokens = static_cast<int>(read_ms(value, key));
    } else if (key == "backchannel_lexicon") {
      config.backchannel_lexicon = read_lexicon(value, key);
    } else if (key == "filled_pause_lexicon") {
      config.filled_pause_lexicon = read_lexicon(value, key);
    } else {
      throw std::invalid_argument("unknown config key '" + key + "'");
    }
  }
  check_config(config);
  return config;
}

AnalysisConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::invalid_argument("cannot read config file " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str());
}

}  // namespace tandem
