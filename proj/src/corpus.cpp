#include "rpn/corpus.hpp"

#include <fstream>
#include <string>
#include <unordered_set>
#include <vector>

namespace rpn {
namespace {

const std::vector<std::string> kPositive = {
    "brilliant",  "charming",  "compelling", "delightful", "engaging",   "enjoyable",
    "excellent",  "fascinating", "fresh",    "funny",      "gorgeous",   "gripping",
    "heartfelt",  "hilarious", "imaginative", "impressive", "inspired",  "lovely",
    "masterful",  "moving",    "powerful",   "refreshing", "remarkable", "riveting",
    "sharp",      "smart",     "stunning",   "superb",     "touching",   "wonderful"};

const std::vector<std::string> kNegative = {
    "awful",     "bland",     "boring",      "clumsy",    "contrived",    "dreadful",
    "dull",      "flat",      "forgettable", "hollow",    "incoherent",   "lazy",
    "lifeless",  "mediocre",  "messy",       "miserable", "muddled",      "painful",
    "pointless", "predictable", "shallow",   "sloppy",    "stale",        "tedious",
    "terrible",  "tiresome",  "unconvincing", "uneven",   "weak",         "wooden"};

// Rare flourishes, Zipf-weighted so the vocabulary grows a realistic tail.
const std::vector<std::string> kRarePositive = {
    "luminous",    "effervescent", "exquisite",   "sublime",     "beguiling",  "radiant",
    "intoxicating", "transcendent", "magnetic",   "resplendent", "soulful",    "crackling",
    "spellbinding", "incandescent", "rhapsodic",  "virtuosic",   "ebullient",  "shimmering",
    "evocative",   "indelible",    "rapturous",   "sumptuous",   "buoyant",    "galvanizing"};

const std::vector<std::string> kRareNegative = {
    "turgid",     "schmaltzy",   "overwrought", "leaden",      "ponderous",  "insipid",
    "vapid",      "maudlin",     "torpid",      "soporific",   "derivative", "interminable",
    "cloying",    "lugubrious",  "moribund",    "hackneyed",   "anemic",     "listless",
    "plodding",   "threadbare",  "histrionic",  "bombastic",   "stilted",    "laborious"};

const std::vector<std::string> kNouns = {
    "movie",     "film",       "story",      "plot",     "script",     "acting",
    "cast",      "director",   "performance", "dialogue", "screenplay", "ending",
    "premise",   "pacing",     "humor",      "drama",    "characters", "visuals",
    "soundtrack", "editing",   "romance",    "thriller", "sequel",     "documentary"};

const std::vector<std::string> kIntensifiers = {"very",       "truly",    "really",
                                                "quite",      "utterly",  "thoroughly",
                                                "genuinely",  "remarkably"};

const std::vector<std::string> kSubjects = {"i",        "we",       "the audience", "critics",
                                            "everyone", "viewers",  "my friends",   "fans"};

const std::vector<std::string> kPositiveVerbs = {"loved",    "enjoyed",  "admired",
                                                 "praised",  "savored",  "cherished",
                                                 "applauded", "embraced"};

const std::vector<std::string> kNegativeVerbs = {"hated",     "loathed",  "dismissed",
                                                 "endured",   "regretted", "resented",
                                                 "mocked",    "panned"};

const std::string& pick(const std::vector<std::string>& pool, RngStream& rng) {
  return pool[static_cast<std::size_t>(rng.next_below(pool.size()))];
}

// Zipf draw: rank r chosen with weight 1/(r+1) over the pool order.
const std::string& pick_zipf(const std::vector<std::string>& pool, RngStream& rng) {
  double total = 0.0;
  for (std::size_t r = 0; r < pool.size(); ++r) total += 1.0 / static_cast<double>(r + 1);
  double target = rng.next_unit() * total;
  for (std::size_t r = 0; r < pool.size(); ++r) {
    target -= 1.0 / static_cast<double>(r + 1);
    if (target <= 0.0) return pool[r];
  }
  return pool.back();
}

// One sentence with its clean polarity label (0 negative, 1 positive).
std::string make_sentence(int polarity, RngStream& rng) {
  const auto& adj = polarity == 1 ? kPositive : kNegative;
  const auto& anti = polarity == 1 ? kNegative : kPositive;
  const auto& rare = polarity == 1 ? kRarePositive : kRareNegative;
  const auto& verbs = polarity == 1 ? kPositiveVerbs : kNegativeVerbs;

  const std::string a1 = rng.next_unit() < 0.15 ? pick_zipf(rare, rng) : pick(adj, rng);
  const std::string a2 = rng.next_unit() < 0.15 ? pick_zipf(rare, rng) : pick(adj, rng);
  const std::string q = pick(anti, rng);
  const std::string n1 = pick(kNouns, rng);
  std::string n2 = pick(kNouns, rng);
  if (n2 == n1) n2 = pick(kNouns, rng);
  const std::string in = pick(kIntensifiers, rng);
  const std::string subj = pick(kSubjects, rng);
  const std::string verb = pick(verbs, rng);

  switch (rng.next_below(10)) {
    case 0: return "the " + n1 + " is " + in + " " + a1 + " .";
    case 1: return "the " + n1 + " was " + a1 + " and " + a2 + " .";
    case 2: return subj + " " + verb + " the " + n1 + " .";
    case 3: return "the " + n1 + " is not " + q + " .";
    case 4: return a1 + " " + n1 + " , " + a2 + " " + n2 + " .";
    case 5: return "the " + n1 + " starts " + q + " but ends " + a1 + " .";
    case 6: return "a " + in + " " + a1 + " " + n1 + " with a " + a2 + " " + n2 + " .";
    case 7: return subj + " found the " + n1 + " " + in + " " + a1 + " .";
    case 8: return "the " + n1 + " feels " + a1 + " from start to finish .";
    default:
      return "despite the " + q + " " + n2 + " , the " + n1 + " is " + a1 + " .";
  }
}

}  // namespace

void CorpusConfig::validate() const {
  if (train_sentences < 1 || dev_sentences < 1 || test_sentences < 1)
    throw ConfigError("corpus split sizes must be >= 1");
  if (label_noise < 0.0 || label_noise > 0.5)
    throw ConfigError("corpus label_noise must be in [0, 0.5], got " +
                      std::to_string(label_noise));
}

SentimentCorpus make_sentiment_corpus(const CorpusConfig& config) {
  config.validate();
  SentimentCorpus corpus;
  std::unordered_set<std::string> seen;

  RngStream root(config.seed);
  const auto fill = [&](LabeledDataset& split, const char* name, Index count) {
    split.split = name;
    split.num_classes = 2;
    RngStream rng = root.derive(name);
    // The template space holds millions of sentences; hitting the attempt cap
    // means the configuration is infeasible, not unlucky.
    const std::uint64_t max_attempts = static_cast<std::uint64_t>(count) * 1000;
    std::uint64_t attempts = 0;
    while (static_cast<Index>(split.sequences.size()) < count) {
      if (++attempts > max_attempts)
        throw ConfigError("corpus: cannot generate " + std::to_string(count) +
                          " unique sentences for split " + name);
      const int polarity = rng.bernoulli(0.5) ? 1 : 0;
      std::string text = make_sentence(polarity, rng);
      if (!seen.insert(text).second) continue;
      int label = polarity;
      if (rng.bernoulli(config.label_noise)) {
        label = 1 - label;
        ++corpus.noisy_labels;
      }
      TokenSequence seq;
      seq.raw_text = std::move(text);
      seq.label = label;
      split.sequences.push_back(std::move(seq));
    }
  };

  fill(corpus.train, "train", config.train_sentences);
  fill(corpus.dev, "dev", config.dev_sentences);
  fill(corpus.test, "test", config.test_sentences);
  return corpus;
}

void write_corpus_tsv(const LabeledDataset& split, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << "sentence\tlabel\n";
  for (const TokenSequence& seq : split.sequences)
    out << seq.raw_text << '\t' << seq.label << '\n';
  if (!out) throw IoError("failed writing " + path.string());
}

std::filesystem::path write_corpus(const SentimentCorpus& corpus,
                                   const std::filesystem::path& directory) {
  std::filesystem::create_directories(directory);
  write_corpus_tsv(corpus.train, directory / "train.tsv");
  write_corpus_tsv(corpus.dev, directory / "dev.tsv");
  write_corpus_tsv(corpus.test, directory / "test.tsv");

  const std::filesystem::path manifest = directory / "manifest.txt";
  std::ofstream out(manifest, std::ios::trunc);
  if (!out) throw IoError("cannot open " + manifest.string() + " for writing");
  out << "train=train.tsv\n"
      << "dev=dev.tsv\n"
      << "test=test.tsv\n"
      << "text_column=0\n"
      << "label_column=1\n"
      << "has_header=true\n"
      << "strict=true\n";
  if (!out) throw IoError("failed writing " + manifest.string());
  return manifest;
}

DatasetBundle bundle_from_corpus(const SentimentCorpus& corpus, Index vocab_cap,
                                 Index max_seq_len) {
  DatasetBundle bundle;
  bundle.train = corpus.train;
  bundle.dev = corpus.dev;
  bundle.test = corpus.test;
  bundle.num_classes = 2;

  std::vector<std::vector<std::string>> token_lists;
  token_lists.reserve(bundle.train.sequences.size());
  for (const TokenSequence& seq : bundle.train.sequences)
    token_lists.push_back(tokenize(seq.raw_text));
  bundle.vocab = Vocabulary::build(token_lists, vocab_cap);

  encode_dataset(bundle.train, bundle.vocab, max_seq_len);
  encode_dataset(bundle.dev, bundle.vocab, max_seq_len);
  encode_dataset(bundle.test, bundle.vocab, max_seq_len);
  return bundle;
}

}  // namespace rpn
