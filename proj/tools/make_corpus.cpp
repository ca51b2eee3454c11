#include <cstdint>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "rpn/corpus.hpp"

int main(int argc, char** argv) {
  CLI::App app{"make_corpus: write the built-in sentence-polarity corpus as TSV splits"};

  std::string output_dir;
  rpn::CorpusConfig config;
  std::int64_t train = config.train_sentences;
  std::int64_t dev = config.dev_sentences;
  std::int64_t test = config.test_sentences;

  app.add_option("-o,--out", output_dir, "output directory")->required();
  app.add_option("--train", train, "train sentences")->default_str(std::to_string(train));
  app.add_option("--dev", dev, "dev sentences")->default_str(std::to_string(dev));
  app.add_option("--test", test, "test sentences")->default_str(std::to_string(test));
  app.add_option("--noise", config.label_noise, "label flip probability")
      ->default_str("0.06");
  app.add_option("--seed", config.seed, "generator seed")->default_str("2024");

  CLI11_PARSE(app, argc, argv);
  config.train_sentences = train;
  config.dev_sentences = dev;
  config.test_sentences = test;

  try {
    const rpn::SentimentCorpus corpus = rpn::make_sentiment_corpus(config);
    const auto manifest = rpn::write_corpus(corpus, output_dir);
    std::cout << "wrote " << manifest.string() << " (" << corpus.train.size() << " train, "
              << corpus.dev.size() << " dev, " << corpus.test.size() << " test, "
              << corpus.noisy_labels << " flipped labels)\n";
  } catch (const rpn::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const rpn::DataError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
