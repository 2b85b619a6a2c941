// Regenerates the frozen denoiser fixture. Run manually after an
// intentional change to the network definition, then commit the output.
#include <cstdio>

#include "flip/denoiser.hpp"
#include "flip/ltf.hpp"

int main(int argc, char** argv) {
    if (argc != 2) {
        std::fprintf(stderr, "usage: %s <output.ltf>\n", argv[0]);
        return 1;
    }
    const flip::Denoiser d = flip::build_denoiser(42);
    const flip::Field z({8, 8, 1});
    const flip::PromptEmbedding cond = flip::make_prompt_embedding({}, d.embed_dim);
    const flip::Field out = flip::predict_noise(d, z, 1, cond);
    flip::write_ltf(out, argv[1]);
    std::printf("wrote %s\n", argv[1]);
    return 0;
}
