#include <vector>

#include <gtest/gtest.h>

#include <fmmpc/sparse.hpp>

using namespace fmmpc;

TEST(CsrMatrix, DuplicatesSummedAndColumnsSorted)
{
    const auto m = CsrMatrix::from_triplets(2, 3, {{1, 2, 1.0}, {0, 1, 2.0}, {1, 0, 3.0}, {1, 2, 4.0}, {0, 0, 0.0}});
    EXPECT_EQ(m.nonzeros(), 4u);
    EXPECT_EQ(m.row_ptr(), (std::vector<std::size_t>{0, 2, 4}));
    EXPECT_EQ(m.col_idx(), (std::vector<std::size_t>{0, 1, 0, 2}));
    EXPECT_DOUBLE_EQ(m.at(1, 2), 5.0);
    EXPECT_DOUBLE_EQ(m.at(0, 2), 0.0);
}

TEST(CsrMatrix, MultiplyAndTranspose)
{
    const auto m = CsrMatrix::from_triplets(2, 3, {{0, 0, 1}, {0, 2, 2}, {1, 1, 3}});
    const std::vector<double> x{1, 2, 3};
    EXPECT_EQ(m * x, (std::vector<double>{7, 6}));
    std::vector<double> y(3, 1.0);
    m.multiply_transpose_add(std::vector<double>{1, 1}, y);
    EXPECT_EQ(y, (std::vector<double>{2, 4, 3}));
    const auto t = m.transpose();
    EXPECT_EQ(t.rows(), 3u);
    EXPECT_DOUBLE_EQ(t.at(2, 0), 2.0);
    EXPECT_THROW(m.multiply(std::vector<double>{1, 2}, y), std::invalid_argument);
}

TEST(CsrMatrix, SymmetryDefectAndBlocks)
{
    const auto s = CsrMatrix::from_triplets(3, 3, {{0, 1, 2}, {1, 0, 2}, {2, 2, 5}, {0, 2, 1}});
    EXPECT_DOUBLE_EQ(s.symmetry_defect(), 1.0);
    const auto b = s.block(0, 1, 2, 2);
    EXPECT_EQ(b.rows(), 2u);
    EXPECT_DOUBLE_EQ(b.at(0, 0), 2.0);
    EXPECT_DOUBLE_EQ(b.at(0, 1), 1.0);
    EXPECT_THROW(s.block(2, 2, 2, 2), std::out_of_range);
    EXPECT_EQ(CsrMatrix::identity(3).diagonal(), (std::vector<double>{1, 1, 1}));
    EXPECT_THROW(CsrMatrix::from_triplets(1, 1, {{1, 0, 1.0}}), std::out_of_range);
}
