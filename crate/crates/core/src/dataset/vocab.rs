//! Preset type vocabularies. Datasets carry their own vocabulary; these are
//! convenience lists for building one.

/// The 11 coarse item types of the Polyvore68K outfits.
pub const POLYVORE_68K: [&str; 11] = [
    "Accessories",
    "All body",
    "Bags",
    "Bottoms",
    "Hats",
    "Jewellery",
    "Outerwear",
    "Scarves",
    "Shoes",
    "Sunglasses",
    "Tops",
];

/// The 37 fashion types kept for Polyvore21K.
pub const POLYVORE_21K: [&str; 37] = [
    "Accessories",
    "Activewear",
    "Baby",
    "Bags and Wallets",
    "Belts",
    "Boys",
    "Cardigans and Vests",
    "Clothing",
    "Costumes",
    "Cover-ups",
    "Dresses",
    "Eyewear",
    "Girls",
    "Gloves",
    "Hats",
    "Hosiery and Socks",
    "Jeans",
    "Jewellery",
    "Jumpsuits",
    "Juniors",
    "Kids",
    "Maternity",
    "Outerwear",
    "Pants",
    "Scarves",
    "Shoes",
    "Shorts",
    "Skirts",
    "Sleepwear",
    "Suits",
    "Sweaters and Hoodies",
    "Swimwear",
    "Ties",
    "Tops",
    "Underwear",
    "Watches",
    "Wedding Dresses",
];
