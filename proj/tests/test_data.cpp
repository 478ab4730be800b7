#include <cmath>
#include <set>

#include <gtest/gtest.h>

#include "fixtures.hpp"
#include "gradflip/data.hpp"
#include "gradflip/error.hpp"
#include "gradflip/text_io.hpp"

namespace gradflip {
namespace {

TEST(Generator, ProducesRequestedCountsAndVocab) {
  GenConfig g;
  const Dataset ds = generate(g);
  EXPECT_EQ(ds.size(), 12u * 63u);
  EXPECT_EQ(ds.n_speakers(), 12u);
  EXPECT_EQ(ds.vocab.size(), 7u);
  EXPECT_EQ(ds.separator, 6u);
  EXPECT_EQ(ds.vocab.back(), "|");
  EXPECT_NO_THROW(ds.validate());
}

TEST(Generator, TranscriptsFollowTheGrammar) {
  GenConfig g;
  g.utterances_per_speaker = 5;
  const Dataset ds = generate(g);
  for (const auto& u : ds.utterances) {
    ASSERT_TRUE(u.transcript.has_value());
    const auto& t = *u.transcript;
    EXPECT_NE(t.front(), 6);
    EXPECT_NE(t.back(), 6);
    for (std::size_t i = 1; i < t.size(); ++i) EXPECT_NE(t[i], t[i - 1]);
    std::size_t words = 1, letters = 0;
    for (int tok : t) {
      if (tok == 6) {
        EXPECT_GE(letters, g.letters_min);
        EXPECT_LE(letters, g.letters_max);
        ++words;
        letters = 0;
      } else {
        ++letters;
      }
    }
    EXPECT_GE(words, g.words_min);
    EXPECT_LE(words, g.words_max);
    EXPECT_GE(u.frames(), t.size() * g.frames_min);
    EXPECT_LE(u.frames(), t.size() * g.frames_max);
  }
}

TEST(Generator, IsDeterministicInTheSeed) {
  GenConfig g = testing::tiny_gen_config();
  EXPECT_EQ(generate(g), generate(g));
  EXPECT_EQ(dataset_to_string(generate(g)), dataset_to_string(generate(g)));
  GenConfig h = g;
  h.seed += 1;
  EXPECT_FALSE(generate(g) == generate(h));
}

TEST(Generator, PrototypesAreOrthogonalWithRequestedScale) {
  GenConfig g;
  const auto p = token_prototypes(g);
  ASSERT_EQ(p.size(), 7u);
  for (std::size_t a = 0; a < p.size(); ++a)
    for (std::size_t b = 0; b < p.size(); ++b) {
      double dot = 0.0;
      for (std::size_t i = 0; i < g.dim; ++i) dot += p[a][i] * p[b][i];
      EXPECT_NEAR(dot, a == b ? 4.0 : 0.0, 1e-9);
    }
  g.dim = 6;
  EXPECT_THROW(token_prototypes(g), ValueError);
}

TEST(Generator, CleanFramesEqualPrototypes) {
  const GenConfig g = testing::clean_gen_config(3);
  const Dataset ds = generate(g);
  const auto p = token_prototypes(g);
  for (const auto& u : ds.utterances) {
    std::set<std::vector<double>> seen;
    for (std::size_t t = 0; t < u.frames(); ++t) {
      std::vector<double> f(g.dim);
      for (std::size_t i = 0; i < g.dim; ++i) f[i] = u.features.at(t, i);
      seen.insert(f);
    }
    for (const auto& f : seen) {
      bool match = false;
      for (const auto& q : p) {
        bool eq = true;
        for (std::size_t i = 0; i < g.dim; ++i) eq = eq && std::abs(f[i] - q[i]) < 1e-12;
        match = match || eq;
      }
      EXPECT_TRUE(match);
    }
  }
}

TEST(Generator, ValidationErrors) {
  GenConfig g;
  g.n_speakers = 0;
  EXPECT_THROW(generate(g), ValueError);
  g = GenConfig{};
  g.frames_min = 5;
  g.frames_max = 4;
  EXPECT_THROW(generate(g), ValueError);
  g = GenConfig{};
  g.noise_sigma = 1.0;
  g.offset_sigma = 0.1;
  EXPECT_THROW(generate(g), ValueError);
  g = GenConfig{};
  g.semi_speakers = 2;
  EXPECT_THROW(generate(g), ValueError);
}

TEST(Generator, SemiSpeakersComeLastWithoutTranscripts) {
  GenConfig g = testing::tiny_gen_config(3, 4);
  g.semi_speakers = 2;
  g.semi_utterances_per_speaker = 3;
  const Dataset ds = generate(g);
  EXPECT_EQ(ds.n_speakers(), 5u);
  EXPECT_EQ(ds.size(), 3u * 4u + 2u * 3u);
  for (const auto& u : ds.utterances) EXPECT_EQ(u.transcript.has_value(), u.speaker < 3);
  const SemiPartition part = partition_semi(ds);
  EXPECT_EQ(part.transcribed.n_speakers(), 3u);
  EXPECT_EQ(part.untranscribed.n_speakers(), 2u);
  EXPECT_EQ(part.untranscribed.size(), 6u);
  for (const auto& u : part.untranscribed.utterances) EXPECT_LT(u.speaker, 2u);
}

TEST(Split, StratifiedCountsAndDisjointness) {
  GenConfig g;
  const Dataset ds = generate(g);
  const Splits s = split(ds, 0.8, 0.1, 1);
  EXPECT_EQ(s.train.size(), 12u * 50u);
  EXPECT_EQ(s.dev.size(), 12u * 6u);
  EXPECT_EQ(s.test.size(), 12u * 7u);
  std::set<std::string> ids;
  for (const Dataset* d : {&s.train, &s.dev, &s.test})
    for (const auto& u : d->utterances) EXPECT_TRUE(ids.insert(u.id).second);
  EXPECT_EQ(ids.size(), ds.size());
  EXPECT_EQ(s.dev.speakers, ds.speakers);
}

TEST(Split, DeterministicAndRejectsBadFractions) {
  const Dataset ds = generate(testing::tiny_gen_config(3, 10));
  EXPECT_EQ(split(ds, 0.6, 0.2, 4).dev, split(ds, 0.6, 0.2, 4).dev);
  EXPECT_THROW(split(ds, 0.9, 0.2, 4), ValueError);
  EXPECT_THROW(split(ds, 0.0, 0.2, 4), ValueError);
  EXPECT_THROW(split(generate(testing::tiny_gen_config(3, 2)), 0.5, 0.2, 4), ValueError);
}

TEST(Subset, FirstSpeakersAndUtterances) {
  const Dataset ds = generate(testing::tiny_gen_config(4, 5));
  const Dataset sub = select_subset(ds, 2, 3);
  EXPECT_EQ(sub.size(), 6u);
  EXPECT_EQ(sub.n_speakers(), 2u);
  EXPECT_THROW(select_subset(ds, 5, 1), ValueError);
  EXPECT_THROW(select_subset(ds, 2, 6), ValueError);
}

TEST(Serialization, TextRoundTripIsExact) {
  GenConfig g = testing::tiny_gen_config(2, 3);
  g.semi_speakers = 1;
  g.semi_utterances_per_speaker = 2;
  const Dataset ds = generate(g);
  const std::string text = dataset_to_string(ds);
  const Dataset back = dataset_from_string(text);
  EXPECT_EQ(back, ds);
  EXPECT_EQ(dataset_to_string(back), text);
}

TEST(Serialization, FileRoundTrip) {
  const std::string dir = testing::scratch_dir("data");
  const Dataset ds = generate(testing::tiny_gen_config());
  save_dataset(ds, dir + "/x.train");
  EXPECT_EQ(load_dataset(dir + "/x.train"), ds);
}

TEST(Serialization, ErrorsCarryLineNumbers) {
  const Dataset ds = generate(testing::tiny_gen_config(1, 2));
  const std::string text = dataset_to_string(ds);
  EXPECT_THROW(dataset_from_string(""), ParseError);
  const auto lines = split(text, '\n');
  std::string broken = lines[0] + "\n" + lines[1] + "\n{\"id\":\"x\",\"speaker\":7}\n";
  try {
    dataset_from_string(broken);
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 3u);
  }
}

TEST(Dataset, ValidateCatchesInconsistencies) {
  Dataset ds = generate(testing::tiny_gen_config(2, 2));
  ds.utterances[0].speaker = 5;
  EXPECT_THROW(ds.validate(), ValueError);
  ds = generate(testing::tiny_gen_config(2, 2));
  ds.dim = 3;
  EXPECT_THROW(ds.validate(), ValueError);
}

}  // namespace
}  // namespace gradflip
