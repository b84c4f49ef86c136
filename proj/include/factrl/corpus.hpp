#pragma once

#include <functional>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace factrl::corpus {

enum class SegmentClass { Factual, Reasoning, Unclassified };

std::string to_string(SegmentClass c);
SegmentClass segment_class_from_string(std::string_view s);

/// One sentence of a source document. Ids are consecutive from 0 in
/// original text order; `text` keeps its terminal punctuation.
struct CorpusSegment {
  int id = 0;
  std::string text;
  std::string doc_id;
  SegmentClass cls = SegmentClass::Unclassified;
};

/// A segment plus its k nearest neighbors by id on each side, clipped at
/// document boundaries. Context is sorted by id and excludes the center.
struct ContextWindow {
  CorpusSegment center;
  std::vector<CorpusSegment> context;
  int k = 1;
};

struct QARecord {
  std::string question;
  std::string answer;
  std::vector<int> source_ids;
};

struct CoTRecord {
  std::string question;
  std::string thought;  // delimited by the begin/end thought markers
  std::string answer;
  std::vector<int> source_ids;
};

struct MarkerPair {
  std::string begin = "<|begin_of_thought|>";
  std::string end = "<|end_of_thought|>";
};

// Default sentence terminals: 。．！？； . ! ? ;
std::set<char32_t> default_terminals();

// Parses each scalar value of `s` as a terminal character.
std::set<char32_t> terminals_from_string(std::string_view s);

// Splits a document into sentences after each terminal character. Trailing
// text after the last terminal becomes a final segment. Concatenating the
// returned texts reproduces the input minus leading/trailing whitespace.
std::vector<CorpusSegment> segment(std::string_view document,
                                   const std::string& doc_id,
                                   const std::set<char32_t>& terminals);

using Classifier = std::function<SegmentClass(const ContextWindow&)>;

// Connectives that mark a sentence as contextual reasoning rather than a
// bare factual statement.
std::vector<std::string> default_reasoning_cues();

// Deterministic classifier: Reasoning iff the center sentence contains any
// cue as a substring, else Factual.
Classifier lexicon_classifier(std::vector<std::string> cues);

SegmentClass classify(const ContextWindow& window, const Classifier& classifier);

// One window per segment; boundary segments get truncated context.
std::vector<ContextWindow> build_windows(const std::vector<CorpusSegment>& segments, int k);

// Template-based record synthesis for the desk-scale corpus.
QARecord build_qa(const ContextWindow& window);
CoTRecord build_cot(const ContextWindow& window, const MarkerPair& markers);

// True iff the record carries exactly one begin marker and exactly one end
// marker, begin before end, and question/answer are nonempty.
bool validate_cot(const CoTRecord& record, const MarkerPair& markers);

// JSON-Lines serialization. Field names match the struct members.
std::string to_jsonl(const CorpusSegment& s);
std::string to_jsonl(const QARecord& r);
std::string to_jsonl(const CoTRecord& r);
CorpusSegment segment_from_jsonl(std::string_view line);
QARecord qa_from_jsonl(std::string_view line);
CoTRecord cot_from_jsonl(std::string_view line);

}  // namespace factrl::corpus
