#include <algorithm>
#include <cctype>
#include <set>
#include <sstream>

#include "gebc/text.hpp"
#include "json.hpp"

using json = nlohmann::json;

namespace gebc {

namespace {
const char* kSpecialNames[kNumSpecials] = {"<pad>", "<bos>", "<eos>", "<cls>",
                                           "<subj>", "<bef>", "<aft>", "<unk>"};

std::string lowercase(const std::string& s) {
  std::string out = s;
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return char(std::tolower(c)); });
  return out;
}
}  // namespace

Vocab Vocab::build(const std::vector<std::string>& words) {
  Vocab v;
  for (size_t i = 0; i < kNumSpecials; ++i) {
    v.id_to_token.push_back(kSpecialNames[i]);
  }
  std::set<std::string> uniq;
  for (const auto& w : words) uniq.insert(lowercase(w));
  for (const auto& w : uniq) {
    if (std::find(std::begin(kSpecialNames), std::end(kSpecialNames), w) !=
        std::end(kSpecialNames)) {
      continue;
    }
    v.id_to_token.push_back(w);
  }
  // size >= 16 invariant; reserve filler slots when the corpus is tiny
  while (v.id_to_token.size() < 16) {
    v.id_to_token.push_back("<reserved" + std::to_string(v.id_to_token.size()) +
                            ">");
  }
  for (size_t i = 0; i < v.id_to_token.size(); ++i) {
    v.token_to_id[v.id_to_token[i]] = int64_t(i);
  }
  return v;
}

Vocab Vocab::from_json(const std::string& json_text) {
  json j = json::parse(json_text);
  Vocab v;
  size_t max_id = 0;
  for (auto it = j.begin(); it != j.end(); ++it) {
    const int64_t id = it.value().get<int64_t>();
    if (id < 0) throw DataError("vocab: negative id");
    v.token_to_id[it.key()] = id;
    max_id = std::max(max_id, size_t(id));
  }
  if (v.token_to_id.size() != max_id + 1) {
    throw DataError("vocab: ids not dense and contiguous");
  }
  v.id_to_token.assign(max_id + 1, "");
  for (const auto& [tok, id] : v.token_to_id) v.id_to_token[size_t(id)] = tok;
  for (size_t i = 0; i < kNumSpecials; ++i) {
    if (v.id_to_token[i] != kSpecialNames[i]) {
      throw DataError("vocab: special token mismatch at id " + std::to_string(i));
    }
  }
  return v;
}

std::string Vocab::to_json() const {
  json j = json::object();
  for (const auto& [tok, id] : token_to_id) j[tok] = id;
  return j.dump();
}

int64_t Vocab::id(const std::string& token) const {
  auto it = token_to_id.find(token);
  return it == token_to_id.end() ? kUnk : it->second;
}

std::vector<int64_t> tokenize(const std::string& text, const Vocab& vocab) {
  if (text.empty()) throw DataError("tokenize: empty text");
  std::istringstream iss(lowercase(text));
  std::string w;
  std::vector<int64_t> ids;
  while (iss >> w) ids.push_back(vocab.id(w));
  if (ids.empty()) throw DataError("tokenize: whitespace-only text");
  return ids;
}

std::string detokenize(const std::vector<int64_t>& ids, const Vocab& vocab) {
  std::string out;
  for (int64_t id : ids) {
    if (id < 0 || size_t(id) >= vocab.size()) {
      throw DataError("detokenize: id out of range");
    }
    if (id < int64_t(kNumSpecials)) continue;
    if (!out.empty()) out += ' ';
    out += vocab.id_to_token[size_t(id)];
  }
  return out;
}

std::vector<int64_t> build_target(const CaptionTriplet& captions,
                                  CaptionType type, const Vocab& vocab) {
  const std::string* text = nullptr;
  switch (type) {
    case CaptionType::Subject: text = &captions.subject; break;
    case CaptionType::Before: text = &captions.status_before; break;
    case CaptionType::After: text = &captions.status_after; break;
  }
  std::vector<int64_t> seq;
  seq.push_back(type_token(type));
  seq.push_back(kBos);
  for (int64_t id : tokenize(*text, vocab)) seq.push_back(id);
  seq.push_back(kEos);
  if (seq.size() > kMaxSeqLen) {
    seq.resize(kMaxSeqLen);
    seq.back() = kEos;
  }
  return seq;
}

}  // namespace gebc
