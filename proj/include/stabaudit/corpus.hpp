#pragma once

#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "stabaudit/errors.hpp"
#include "stabaudit/text.hpp"

// Input-profile corpus: JSON documents keyed by the scenario template's
// input variables, plus placeholder filling for AUT prompt templates.

namespace stabaudit {

struct Profile {
  std::string id;
  std::string scenario_id;
  nlohmann::ordered_json fields;  // object: variable name -> string or list of strings
};

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) raise(ErrorCode::InvalidArgument, "cannot read file '" + path + "'");
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

inline std::vector<Profile> parse_profiles(const nlohmann::ordered_json& doc) {
  if (!doc.contains("profiles") || !doc["profiles"].is_array()) {
    raise(ErrorCode::EmptyCorpus, "corpus document lacks a 'profiles' list");
  }
  std::vector<Profile> out;
  for (const auto& entry : doc["profiles"]) {
    Profile p;
    p.id = entry.value("id", "");
    p.scenario_id = entry.value("scenario", "");
    if (p.id.empty() || p.scenario_id.empty()) {
      raise(ErrorCode::EmptyCorpus, "profile entries need 'id' and 'scenario'");
    }
    p.fields = entry.value("fields", nlohmann::ordered_json::object());
    out.push_back(std::move(p));
  }
  return out;
}

inline std::vector<Profile> load_profiles(const std::string& path) {
  nlohmann::ordered_json doc;
  try {
    doc = nlohmann::ordered_json::parse(read_file(path));
  } catch (const Error&) {
    throw;
  } catch (const std::exception& e) {
    raise(ErrorCode::EmptyCorpus, "corpus file '" + path + "' is not valid JSON: " + e.what());
  }
  return parse_profiles(doc);
}

// Field rendered for prompt embedding: strings pass through, lists become a
// bracketed, quoted listing.
inline std::string render_field(const nlohmann::ordered_json& value) {
  if (value.is_string()) return value.get<std::string>();
  if (value.is_array()) {
    std::string out = "[";
    for (size_t i = 0; i < value.size(); ++i) {
      if (i > 0) out += ", ";
      out += "\"" + (value[i].is_string() ? value[i].get<std::string>() : value[i].dump()) + "\"";
    }
    return out + "]";
  }
  return value.dump();
}

// Field as a needle list for verbatim checks: a string is one needle, a
// list contributes each item.
inline std::vector<std::string> field_as_needles(const nlohmann::ordered_json& value) {
  std::vector<std::string> needles;
  if (value.is_string()) {
    needles.push_back(value.get<std::string>());
  } else if (value.is_array()) {
    for (const auto& item : value) {
      needles.push_back(item.is_string() ? item.get<std::string>() : item.dump());
    }
  }
  return needles;
}

// Replaces every {placeholder} whose name is a known profile field. A
// placeholder without a matching field is an error; literal braces that do
// not form a [a-z_]+ placeholder pass through untouched.
inline std::string fill_template(const std::string& tpl, const Profile& profile) {
  std::string out;
  out.reserve(tpl.size());
  size_t i = 0;
  while (i < tpl.size()) {
    if (tpl[i] != '{') {
      out.push_back(tpl[i++]);
      continue;
    }
    const size_t close = tpl.find('}', i + 1);
    bool is_placeholder = close != std::string::npos && close > i + 1;
    std::string name;
    if (is_placeholder) {
      name = tpl.substr(i + 1, close - i - 1);
      for (char c : name) {
        if (!(std::islower(static_cast<unsigned char>(c)) || c == '_')) {
          is_placeholder = false;
          break;
        }
      }
    }
    if (!is_placeholder) {
      out.push_back(tpl[i++]);
      continue;
    }
    if (!profile.fields.contains(name)) {
      raise(ErrorCode::MissingField,
            "profile '" + profile.id + "' lacks field '" + name + "' required by the template");
    }
    out += render_field(profile.fields[name]);
    i = close + 1;
  }
  return out;
}

}  // namespace stabaudit
