#include <gtest/gtest.h>

#include <algorithm>
#include <fstream>
#include <set>

#include "kgrec/errors.hpp"
#include "kgrec/ingest.hpp"
#include "kgrec/numeric/rng.hpp"
#include "support.hpp"

using namespace kgrec;
namespace fs = std::filesystem;

namespace {

void write(const fs::path& p, std::string_view text) {
    std::ofstream out(p, std::ios::binary);
    out << text;
}

fs::path three_line_movielens() {
    auto dir = kgrec::testing::scratch_dir("ml3");
    write(dir / "users.dat", "1::F::1::10::48067\n2::M::56::16::70072\n3::M::25::15::55117\n");
    write(dir / "movies.dat",
          "1::Toy Story (1995)::Animation|Children's|Comedy\n2::Jumanji (1995)::Adventure\n3::Heat (1995)::Action|Crime\n");
    write(dir / "ratings.dat", "1::1::5::978300760\n2::2::3::978302109\n3::3::4::978301968\n");
    return dir;
}

std::size_t count_relation(const std::vector<kg::TripleDescriptor>& ts, std::string_view rel) {
    return static_cast<std::size_t>(std::count_if(ts.begin(), ts.end(), [&](const auto& t) { return t.relation == rel; }));
}

}  // namespace

TEST(LoadMovieLens, ThreeLineFixture) {
    auto data = ingest::load_movielens(three_line_movielens());
    EXPECT_EQ(data.users.size(), 3u);
    EXPECT_EQ(data.movies.size(), 3u);
    EXPECT_EQ(data.ratings.size(), 3u);
    EXPECT_EQ(data.users[1].gender, "M");
    EXPECT_EQ(data.users[1].age, "56");
    EXPECT_EQ(data.movies[0].genres, (std::vector<std::string>{"Animation", "Children's", "Comedy"}));
    EXPECT_EQ(data.ratings[2].timestamp, 978301968);
}

TEST(LoadMovieLens, ShortRatingRowReportsLine) {
    auto dir = three_line_movielens();
    write(dir / "ratings.dat", "1::1::5::978300760\n2::2::3\n");
    try {
        ingest::load_movielens(dir);
        FAIL() << "expected RowFormatError";
    } catch (const RowFormatError& e) {
        EXPECT_EQ(e.file(), "ratings.dat");
        EXPECT_EQ(e.line(), 2u);
    }
}

TEST(LoadMovieLens, RatingOutOfRange) {
    auto dir = three_line_movielens();
    write(dir / "ratings.dat", "1::1::6::978300760\n");
    EXPECT_THROW(ingest::load_movielens(dir), RowFormatError);
}

TEST(LoadMovieLens, MissingFile) {
    auto dir = three_line_movielens();
    fs::remove(dir / "movies.dat");
    EXPECT_THROW(ingest::load_movielens(dir), MissingFile);
}

TEST(LoadMovieLens, Latin1TitlesBecomeUtf8) {
    auto dir = three_line_movielens();
    write(dir / "movies.dat", "1::Am\xE9lie (2001)::Comedy\n");
    auto data = ingest::load_movielens(dir);
    EXPECT_EQ(data.movies[0].title, "Am\xC3\xA9lie (2001)");
}

TEST(LoadMovieLens, FixtureCorpusWithCreditsAndPosters) {
    auto data = ingest::load_movielens(kgrec::testing::data_dir() / "ml_tiny");
    EXPECT_EQ(data.users.size(), 40u);
    EXPECT_EQ(data.movies.size(), 30u);
    EXPECT_EQ(data.ratings.size(), 600u);
    const auto& m1 = data.movies[0];
    EXPECT_EQ(m1.directors, (std::vector<std::string>{"Dee \"DJ\" Roy"}));
    EXPECT_EQ(m1.writers, (std::vector<std::string>{"Cruz, Ida"}));
    EXPECT_EQ(m1.actors.size(), 2u);
    ASSERT_TRUE(m1.poster);
    EXPECT_EQ(ingest::decode_poster(*m1.poster), (std::vector<std::uint8_t>{0x89, 0x50, 0x4e, 0x47, 1, 0, 255, 7}));
    EXPECT_FALSE(data.movies[2].poster);
}

TEST(LoadMovieLens, BadCreditsHeader) {
    auto dir = three_line_movielens();
    write(dir / "movie_credits.csv", "id,director\n1,X\n");
    EXPECT_THROW(ingest::load_movielens(dir), RowFormatError);
}

TEST(LoadBookCrossing, TwoRowFixtures) {
    auto data = ingest::load_bookcrossing(kgrec::testing::data_dir() / "bx_tiny");
    EXPECT_EQ(data.users.size(), 2u);
    EXPECT_EQ(data.books.size(), 2u);
    EXPECT_EQ(data.ratings.size(), 2u);
    EXPECT_EQ(data.users[0].age, ingest::kUnknown);  // NULL age
    EXPECT_EQ(data.users[1].age, "18");
    EXPECT_EQ(data.books[0].author, "Mark P. O. Morford");
    EXPECT_EQ(data.ratings[1].rating, 8.0);
}

TEST(LoadBookCrossing, RatingOutOfRange) {
    auto dir = kgrec::testing::scratch_dir("bx");
    fs::copy(kgrec::testing::data_dir() / "bx_tiny", dir, fs::copy_options::recursive | fs::copy_options::overwrite_existing);
    write(dir / "BX-Book-Ratings.csv", "\"User-ID\";\"ISBN\";\"Book-Rating\"\n\"1\";\"0195153448\";\"11\"\n");
    EXPECT_THROW(ingest::load_bookcrossing(dir), RowFormatError);
}

TEST(LoadBookCrossing, MissingUsersFile) {
    auto dir = kgrec::testing::scratch_dir("bx");
    fs::copy(kgrec::testing::data_dir() / "bx_tiny", dir, fs::copy_options::recursive | fs::copy_options::overwrite_existing);
    fs::remove(dir / "BX-Users.csv");
    EXPECT_THROW(ingest::load_bookcrossing(dir), MissingFile);
}

TEST(AgeBucket, MapsToMovieLensBuckets) {
    EXPECT_EQ(ingest::age_bucket("4"), ingest::kUnknown);
    EXPECT_EQ(ingest::age_bucket("111"), ingest::kUnknown);
    EXPECT_EQ(ingest::age_bucket("NULL"), ingest::kUnknown);
    EXPECT_EQ(ingest::age_bucket("5"), "1");
    EXPECT_EQ(ingest::age_bucket("18"), "18");
    EXPECT_EQ(ingest::age_bucket("34"), "25");
    EXPECT_EQ(ingest::age_bucket("49"), "45");
    EXPECT_EQ(ingest::age_bucket("110"), "56");
}

TEST(ExtractMovieTriples, CountsPerField) {
    ingest::MovieRecord m;
    m.movie_id = 7;
    m.directors = {"D"};
    m.actors = {"A1", "A2"};
    m.genres = {"Drama"};
    auto ts = ingest::extract_movie_triples(m);
    EXPECT_EQ(ts.size(), 4u);
    for (const auto& t : ts) EXPECT_EQ(t.head, "movie:7");
    EXPECT_EQ(count_relation(ts, "stars"), 2u);
}

TEST(ExtractMovieTriples, EmptyRecordGivesEmptyList) {
    ingest::MovieRecord m;
    m.movie_id = 1;
    EXPECT_TRUE(ingest::extract_movie_triples(m).empty());
}

TEST(ExtractMovieTriples, PosterGivesOneHasPosterTriple) {
    ingest::MovieRecord m;
    m.movie_id = 1;
    m.genres = {"Drama"};
    m.poster = ingest::encode_poster(std::vector<std::uint8_t>{1, 2, 3});
    auto ts = ingest::extract_movie_triples(m);
    EXPECT_EQ(count_relation(ts, "has_poster"), 1u);
}

TEST(ExtractMovieTriples, RelationsFromClosedVocabulary) {
    auto data = ingest::load_movielens(kgrec::testing::data_dir() / "ml_tiny");
    const std::set<std::string> allowed = {"directed_by", "written_by", "stars", "has_genre", "has_poster"};
    for (const auto& m : data.movies) {
        for (const auto& t : ingest::extract_movie_triples(m)) EXPECT_TRUE(allowed.contains(t.relation)) << t.relation;
    }
}

TEST(Poster, Base64Vectors) {
    EXPECT_EQ(ingest::encode_poster({}), "");
    const std::string man = "Man";
    EXPECT_EQ(ingest::encode_poster(std::vector<std::uint8_t>(man.begin(), man.end())), "TWFu");
    EXPECT_EQ(ingest::encode_poster(std::vector<std::uint8_t>{'M', 'a'}), "TWE=");
}

TEST(Poster, RoundTripRandomBytes) {
    numeric::Rng rng(3);
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<std::uint8_t> bytes(rng.uniform_index(64));
        for (auto& b : bytes) b = static_cast<std::uint8_t>(rng.uniform_index(256));
        EXPECT_EQ(ingest::decode_poster(ingest::encode_poster(bytes)), bytes);
    }
}

TEST(SideInfoFiles, LoadFileAndFiles) {
    auto dir = kgrec::testing::scratch_dir("side");
    write(dir / "a.csv", "head,relation,tail\nA,r,B\nB,r,C\n");
    write(dir / "b.nt", "<C> <s> <D> .\n");
    auto a = ingest::load_side_info_file(dir / "a.csv", kg::Dialect::PropertyCsv);
    EXPECT_EQ(a.size(), 2u);

    std::vector<fs::path> same = {dir / "a.csv", dir / "a.csv"};
    kg::KnowledgeGraph g;
    for (const auto& t : ingest::load_side_info_files(same, kg::Dialect::PropertyCsv)) g.add_triple(t.head, t.relation, t.tail);
    EXPECT_EQ(g.triple_count(), 2u);

    auto both = ingest::load_side_info_files(same, kg::Dialect::PropertyCsv);
    auto expected = a;
    expected.insert(expected.end(), a.begin(), a.end());
    EXPECT_EQ(both, expected);
}

TEST(SideInfoFiles, ParseErrorPropagates) {
    auto dir = kgrec::testing::scratch_dir("side");
    write(dir / "bad.nt", "<A> <r> .\n");
    EXPECT_THROW(ingest::load_side_info_file(dir / "bad.nt", kg::Dialect::NTriples), ParseError);
}
