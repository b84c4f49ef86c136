#include "factrl/corpus.hpp"

#include <algorithm>
#include <stdexcept>

#include "factrl/text.hpp"
#include "json.hpp"

namespace factrl::corpus {

using nlohmann::json;

std::string to_string(SegmentClass c) {
  switch (c) {
    case SegmentClass::Factual: return "factual";
    case SegmentClass::Reasoning: return "reasoning";
    case SegmentClass::Unclassified: return "unclassified";
  }
  throw std::logic_error("bad SegmentClass");
}

SegmentClass segment_class_from_string(std::string_view s) {
  if (s == "factual") return SegmentClass::Factual;
  if (s == "reasoning") return SegmentClass::Reasoning;
  if (s == "unclassified") return SegmentClass::Unclassified;
  throw std::invalid_argument("unknown segment class: " + std::string(s));
}

std::set<char32_t> default_terminals() {
  return terminals_from_string("。．！？；.!?;");
}

std::set<char32_t> terminals_from_string(std::string_view s) {
  std::set<char32_t> out;
  for (char32_t cp : text::to_codepoints(s)) out.insert(cp);
  return out;
}

std::vector<CorpusSegment> segment(std::string_view document,
                                   const std::string& doc_id,
                                   const std::set<char32_t>& terminals) {
  if (terminals.empty()) throw std::invalid_argument("terminals must be nonempty");
  std::string_view doc = text::trim(document);
  std::vector<CorpusSegment> out;
  std::size_t pos = 0;
  std::size_t start = 0;
  while (pos < doc.size()) {
    std::size_t cp_start = pos;
    char32_t cp = text::decode_utf8(doc, pos);
    if (terminals.count(cp)) {
      out.push_back({static_cast<int>(out.size()),
                     std::string(doc.substr(start, pos - start)), doc_id,
                     SegmentClass::Unclassified});
      start = pos;
    }
    (void)cp_start;
  }
  if (start < doc.size()) {
    // Trailing text after the last terminal still becomes a segment.
    out.push_back({static_cast<int>(out.size()),
                   std::string(doc.substr(start)), doc_id,
                   SegmentClass::Unclassified});
  }
  return out;
}

std::vector<std::string> default_reasoning_cues() {
  return {"故",   "因此", "所以", "因为", "由是", "是以", "於是", "于是",
          "then", "therefore", "because", "thus", "hence", "so that"};
}

Classifier lexicon_classifier(std::vector<std::string> cues) {
  return [cues = std::move(cues)](const ContextWindow& window) {
    for (const auto& cue : cues) {
      if (!cue.empty() && window.center.text.find(cue) != std::string::npos) {
        return SegmentClass::Reasoning;
      }
    }
    return SegmentClass::Factual;
  };
}

SegmentClass classify(const ContextWindow& window, const Classifier& classifier) {
  return classifier(window);
}

std::vector<ContextWindow> build_windows(const std::vector<CorpusSegment>& segments, int k) {
  if (k < 1) throw std::invalid_argument("k must be positive");
  std::vector<ContextWindow> out;
  out.reserve(segments.size());
  const int n = static_cast<int>(segments.size());
  for (int i = 0; i < n; ++i) {
    ContextWindow w;
    w.center = segments[i];
    w.k = k;
    for (int j = std::max(0, i - k); j <= std::min(n - 1, i + k); ++j) {
      if (j != i) w.context.push_back(segments[j]);
    }
    out.push_back(std::move(w));
  }
  return out;
}

QARecord build_qa(const ContextWindow& window) {
  QARecord r;
  r.question = "原文记载了什么？ / What does the source record?";
  r.answer = window.center.text;
  r.source_ids.push_back(window.center.id);
  return r;
}

CoTRecord build_cot(const ContextWindow& window, const MarkerPair& markers) {
  CoTRecord r;
  r.question = "结合上下文分析： / Analyze in context: " + window.center.text;
  std::string body;
  for (const auto& seg : window.context) {
    if (seg.id < window.center.id) body += seg.text;
  }
  body += window.center.text;
  for (const auto& seg : window.context) {
    if (seg.id > window.center.id) body += seg.text;
  }
  r.thought = markers.begin + body + markers.end;
  r.answer = window.center.text;
  for (const auto& seg : window.context) r.source_ids.push_back(seg.id);
  r.source_ids.push_back(window.center.id);
  std::sort(r.source_ids.begin(), r.source_ids.end());
  return r;
}

namespace {

int count_occurrences(std::string_view haystack, std::string_view needle) {
  if (needle.empty()) return 0;
  int count = 0;
  std::size_t pos = 0;
  while ((pos = haystack.find(needle, pos)) != std::string_view::npos) {
    ++count;
    pos += needle.size();
  }
  return count;
}

}  // namespace

bool validate_cot(const CoTRecord& record, const MarkerPair& markers) {
  if (record.question.empty() || record.answer.empty()) return false;
  if (count_occurrences(record.thought, markers.begin) != 1) return false;
  if (count_occurrences(record.thought, markers.end) != 1) return false;
  return record.thought.find(markers.begin) < record.thought.find(markers.end);
}

std::string to_jsonl(const CorpusSegment& s) {
  json j{{"id", s.id}, {"text", s.text}, {"doc_id", s.doc_id}, {"class", to_string(s.cls)}};
  return j.dump();
}

std::string to_jsonl(const QARecord& r) {
  json j{{"question", r.question}, {"answer", r.answer}, {"source_ids", r.source_ids}};
  return j.dump();
}

std::string to_jsonl(const CoTRecord& r) {
  json j{{"question", r.question},
         {"thought", r.thought},
         {"answer", r.answer},
         {"source_ids", r.source_ids}};
  return j.dump();
}

CorpusSegment segment_from_jsonl(std::string_view line) {
  json j = json::parse(line);
  CorpusSegment s;
  s.id = j.at("id").get<int>();
  s.text = j.at("text").get<std::string>();
  s.doc_id = j.at("doc_id").get<std::string>();
  s.cls = segment_class_from_string(j.at("class").get<std::string>());
  return s;
}

QARecord qa_from_jsonl(std::string_view line) {
  json j = json::parse(line);
  QARecord r;
  r.question = j.at("question").get<std::string>();
  r.answer = j.at("answer").get<std::string>();
  r.source_ids = j.at("source_ids").get<std::vector<int>>();
  return r;
}

CoTRecord cot_from_jsonl(std::string_view line) {
  json j = json::parse(line);
  CoTRecord r;
  r.question = j.at("question").get<std::string>();
  r.thought = j.at("thought").get<std::string>();
  r.answer = j.at("answer").get<std::string>();
  r.source_ids = j.at("source_ids").get<std::vector<int>>();
  return r;
}

}  // namespace factrl::corpus
