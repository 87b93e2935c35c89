//! The 25 evaluation prompts and the keywords of the appended-keyword
//! baseline.

/// Prompts of the paired experiment, in a fixed order.
pub const PROMPTS: [&str; 25] = [
    "A fountain, sculpture",
    "A pyramid over a snowy scenery",
    "A giant octopus, bioluminescence",
    "A still life of flowers, volumetric lighting",
    "A still life of flowers, stained glass",
    "A nighttime cityscape, concept art",
    "The sacred library by Simon Stålenhag and Thomas Kinkade, oil on canvas",
    "A gateway between dreams",
    "Space jellyfish, watercolor",
    "Giant skull without a lower jaw, floating above a pile of gems while it leaks gems and \
     bone. An orange, cloudy sky fills the background",
    "An orange overstuffed chair, custom design",
    "Ethereal",
    "A clearing filled with colorful plants in a thick woods where time has stopped, trending \
     on Artstation",
    "An archer lounging against a tree with petals falling, painting by Horace Vernet",
    "Textless, 8k, hyperdetail Papier-mache, Ambient occlusion High key light, Contour rivalry, \
     octane render redshift render, Porcelain painted ceramics by Krystle Mitchell, The \
     efficient panda surrounds bangle, ascot plain peel postfix circadian sunroom",
    "Dimming dares to swifting ruins lights, charges changes on the skies from above, blinks \
     true to throughout, to a closing of hands on spacing world to binding breaks of \
     recreating strings, then to dusting fantasy of hands that try to wave a reach of each, \
     and a spine of splitting reeks of falling sense of decaying skying",
    "Centuries of citadels, and been tuning in tones that been crystalize in a field that felt \
     a widing in its own, still a lighten abyss vision for depths, it still crystalline in \
     souls that truly enjoyed, of a meaning",
    "White marble, white marble bas relief profile sculpture of a beautiful black haired woman \
     with pale skin and a crown on her head sitted on an intricate metal throne, medusa, white \
     and gold kintsugi, feminine shapes, crabs, spiders, scorpions, tarantulas, stunning, art \
     by hr geiger and ridley scott and alphonse mucha and josephine wall, highly detailed, \
     intricately detailed",
    "Photorealistic white marble greek goddess face profile sculpture entwined by golden and \
     crimson vines and roots, flesh shows at some parts under the broken marble, swirling \
     liquified meat and red kintsugi, symbolist, visionary, etheric, entwined with iridiscent \
     fractal lace, alien botanicals, cinematic composition, cinematic lighting",
    "A beautiful mannequin made of marble printed in 3 d geometric neon + kintsugi, facing a \
     giant doorway opening with a neon pink light, flowering iridescent pineapples + orchids, \
     transcendent, vibrant color, clean linework, finely detailed, 4k, trending on artstation, \
     photorealistic, volumetric lighting, octane render",
    "A pirate ship, sepia coloring, hyper-detailed, dusk, 4k octane render",
    "Vaporwave soviet skyline at sunrise, trending on Artstation. Many intrincate details",
    "Marble Polished Tile. Sky Blue is an impressive pale blue quartzite. Its appearance is \
     reminiscent of a splendid blue sky interspersed with fluffy white clouds, as its name \
     suggests. This natural stone's base shuffles different soft blues such as blue lavender, \
     pale blue, and pastel indigo. The veins look like clouds. Decorative marble tile",
    "A photograph of an astronaut riding a horse",
    "A painting of a tree, oil on canvas",
];

/// Aesthetic names used as appended keywords.
pub const KEYWORDS: [&str; 4] = ["aivazovsky", "cloudcore", "gloomcore", "glowwave"];

/// Ordered prompt list for an experiment run.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PromptCorpus {
    prompts: Vec<String>,
}

impl PromptCorpus {
    /// The 25-prompt evaluation list.
    pub fn table() -> Self {
        Self {
            prompts: PROMPTS.iter().map(|p| p.to_string()).collect(),
        }
    }

    /// A custom list, e.g. a subset for quick runs.
    pub fn custom(prompts: Vec<String>) -> Self {
        Self { prompts }
    }

    pub fn prompts(&self) -> &[String] {
        &self.prompts
    }

    pub fn len(&self) -> usize {
        self.prompts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.prompts.is_empty()
    }
}

/// Text the default vocabulary is built from: every prompt plus the
/// keywords, so appended keywords never fall back to the unknown token.
pub fn vocabulary_corpus() -> Vec<String> {
    PROMPTS.iter().chain(KEYWORDS.iter()).map(|s| s.to_string()).collect()
}
