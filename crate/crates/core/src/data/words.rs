//! Common-English word stock for the built-in corpus generator.

pub(crate) const WORDS: &[&str] = &[
    "the",
    "of",
    "and",
    "a",
    "to",
    "in",
    "is",
    "was",
    "he",
    "for",
    "it",
    "with",
    "as",
    "his",
    "on",
    "be",
    "at",
    "by",
    "i",
    "this",
    "had",
    "not",
    "are",
    "but",
    "from",
    "or",
    "have",
    "an",
    "they",
    "which",
    "one",
    "you",
    "were",
    "her",
    "all",
    "she",
    "there",
    "would",
    "their",
    "we",
    "him",
    "been",
    "has",
    "when",
    "who",
    "will",
    "more",
    "no",
    "if",
    "out",
    "so",
    "said",
    "what",
    "up",
    "its",
    "about",
    "into",
    "than",
    "them",
    "can",
    "only",
    "other",
    "new",
    "some",
    "could",
    "time",
    "these",
    "two",
    "may",
    "then",
    "do",
    "first",
    "any",
    "my",
    "now",
    "such",
    "like",
    "our",
    "over",
    "man",
    "me",
    "even",
    "most",
    "made",
    "after",
    "also",
    "did",
    "many",
    "before",
    "must",
    "through",
    "years",
    "where",
    "much",
    "your",
    "way",
    "well",
    "down",
    "should",
    "because",
    "each",
    "just",
    "those",
    "people",
    "mr",
    "how",
    "too",
    "little",
    "state",
    "good",
    "very",
    "make",
    "world",
    "still",
    "own",
    "see",
    "men",
    "work",
    "long",
    "get",
    "here",
    "between",
    "both",
    "life",
    "being",
    "under",
    "never",
    "day",
    "same",
    "another",
    "know",
    "while",
    "last",
    "might",
    "us",
    "great",
    "old",
    "year",
    "off",
    "come",
    "since",
    "against",
    "go",
    "came",
    "right",
    "used",
    "take",
    "three",
    "states",
    "himself",
    "few",
    "house",
    "use",
    "during",
    "without",
    "again",
    "place",
    "american",
    "around",
    "however",
    "home",
    "small",
    "found",
    "mrs",
    "thought",
    "went",
    "say",
    "part",
    "once",
    "general",
    "high",
    "upon",
    "school",
    "every",
    "does",
    "got",
    "united",
    "left",
    "number",
    "course",
    "war",
    "until",
    "always",
    "away",
    "something",
    "fact",
    "though",
    "water",
    "less",
    "public",
    "put",
    "think",
    "almost",
    "hand",
    "enough",
    "far",
    "took",
    "head",
    "yet",
    "government",
    "system",
    "better",
    "set",
    "told",
    "nothing",
    "night",
    "end",
    "why",
    "called",
    "didnt",
    "eyes",
    "find",
    "going",
    "look",
    "asked",
    "later",
    "knew",
    "point",
    "next",
    "program",
    "city",
    "business",
    "give",
    "group",
    "toward",
    "young",
    "days",
    "let",
    "room",
    "within",
    "children",
    "side",
    "social",
    "given",
    "order",
    "present",
    "several",
    "national",
    "rather",
    "second",
    "face",
    "per",
    "possible",
    "among",
    "form",
    "important",
    "often",
    "things",
    "looked",
    "early",
    "white",
    "case",
    "become",
    "large",
    "need",
    "big",
    "four",
    "felt",
    "along",
    "ago",
    "began",
    "turned",
    "love",
    "law",
    "although",
    "whole",
    "problem",
    "line",
    "evening",
    "interest",
    "cant",
    "themselves",
    "best",
    "idea",
    "kind",
    "action",
    "mind",
    "god",
    "house",
    "service",
    "power",
    "thing",
    "word",
    "area",
    "feet",
    "itself",
    "least",
    "perhaps",
    "woman",
    "done",
    "today",
    "moment",
    "study",
    "known",
    "result",
    "times",
    "door",
    "seemed",
    "want",
    "others",
    "hands",
    "mother",
    "members",
    "open",
    "others",
    "certain",
    "name",
    "true",
    "kept",
    "course",
    "taken",
    "help",
    "party",
    "question",
    "anything",
    "making",
    "local",
    "able",
    "either",
    "sense",
    "nature",
    "church",
    "above",
    "words",
    "car",
    "having",
    "history",
    "together",
    "seen",
    "money",
    "light",
    "field",
    "health",
    "six",
    "available",
    "position",
    "herself",
    "country",
    "son",
    "close",
    "short",
    "information",
    "shall",
    "act",
    "rate",
    "become",
    "father",
    "experience",
    "different",
    "center",
    "free",
    "water",
    "road",
    "keep",
    "street",
    "value",
    "human",
    "ever",
    "town",
    "quite",
    "table",
    "half",
    "matter",
    "education",
    "body",
    "feel",
    "low",
    "black",
    "already",
    "real",
    "cost",
    "report",
    "level",
    "call",
    "control",
    "figure",
    "week",
    "saw",
    "north",
    "voice",
    "policy",
    "whether",
    "especially",
    "minutes",
    "paper",
    "behind",
    "companies",
    "dead",
    "nor",
    "run",
    "strong",
    "usually",
    "alone",
    "play",
    "wife",
    "show",
    "force",
    "met",
    "air",
    "brought",
    "heard",
    "believe",
    "economic",
    "community",
    "major",
    "girl",
    "moved",
    "third",
    "necessary",
    "period",
    "age",
    "cut",
    "society",
    "full",
    "political",
    "estate",
    "office",
    "personal",
    "stood",
    "common",
    "started",
    "support",
    "military",
    "total",
    "means",
    "hard",
    "born",
    "story",
    "wanted",
    "job",
    "music",
    "various",
    "effect",
    "morning",
    "hers",
    "class",
    "further",
    "land",
    "friends",
    "across",
    "needed",
    "situation",
    "reason",
    "single",
    "university",
    "english",
    "space",
    "provide",
    "tax",
    "ground",
    "living",
    "increase",
    "english",
    "development",
    "else",
    "everything",
    "similar",
    "for",
    "turn",
    "hours",
    "basis",
    "south",
    "type",
    "understand",
    "process",
    "art",
    "research",
    "certainly",
    "council",
    "future",
    "near",
    "bed",
    "particularly",
    "change",
    "view",
    "entire",
    "farm",
    "industry",
    "army",
    "gave",
    "former",
    "including",
    "past",
    "based",
    "private",
    "considered",
    "plan",
    "outside",
    "special",
    "ten",
    "secretary",
    "conditions",
    "data",
    "red",
    "likely",
    "someone",
    "hour",
    "following",
    "market",
    "front",
    "clear",
    "hope",
    "leave",
    "surface",
    "union",
    "except",
    "sound",
    "mean",
    "five",
    "recent",
    "probably",
    "press",
    "nations",
    "role",
    "miles",
    "amount",
    "department",
    "west",
    "picture",
    "ready",
    "stage",
    "food",
    "committee",
    "difficult",
    "modern",
    "student",
    "cold",
    "lost",
    "return",
    "cannot",
    "middle",
    "federal",
    "seems",
    "board",
    "natural",
    "square",
    "walked",
    "medical",
    "court",
    "hold",
    "costs",
    "attention",
    "production",
    "century",
    "section",
    "son",
    "north",
    "letter",
    "peace",
    "tried",
    "purpose",
    "river",
    "suddenly",
    "earth",
    "wall",
    "wide",
    "according",
    "forces",
    "members",
    "stand",
    "follow",
    "trade",
    "science",
    "sort",
    "added",
    "reached",
    "late",
    "simple",
    "deal",
    "subject",
    "building",
    "spirit",
    "island",
    "statement",
    "wrote",
    "audience",
    "daughter",
    "county",
    "bad",
    "usual",
    "direct",
    "questions",
    "size",
    "training",
    "fall",
    "meeting",
    "evidence",
    "growth",
    "list",
    "friend",
    "doubt",
    "moral",
    "method",
    "husband",
    "ran",
    "pay",
    "provided",
    "effort",
    "heart",
    "knowledge",
    "career",
    "placed",
    "fine",
    "date",
    "nearly",
    "result",
    "due",
    "bring",
    "image",
    "feeling",
    "ideas",
    "everyone",
    "fire",
    "lower",
    "summer",
    "charge",
    "respect",
    "equipment",
    "written",
    "fiscal",
    "decided",
    "person",
    "central",
    "material",
    "issue",
    "ask",
    "budget",
    "cent",
    "industrial",
    "spring",
    "foreign",
    "international",
    "serious",
    "supply",
    "hotel",
    "chance",
    "note",
    "trying",
    "direction",
    "tell",
    "month",
    "addition",
    "instead",
    "piece",
    "meet",
    "defense",
    "particular",
    "higher",
    "eye",
    "blue",
    "influence",
    "month",
    "games",
    "organization",
    "news",
    "pressure",
    "reaction",
    "systems",
    "complete",
    "christian",
    "required",
    "girls",
    "sat",
    "attempt",
    "price",
    "labor",
    "programs",
    "territory",
    "population",
    "normal",
    "earlier",
    "weeks",
    "theory",
    "account",
    "floor",
    "numbers",
    "literature",
    "range",
    "march",
    "determined",
    "inside",
    "current",
    "justice",
    "opportunity",
    "works",
    "efforts",
    "greater",
    "involved",
    "congress",
    "plant",
    "ways",
    "function",
    "green",
    "average",
    "mouth",
    "manner",
    "trouble",
    "merely",
    "energy",
    "gone",
    "received",
    "treatment",
    "learned",
    "region",
    "station",
    "stop",
    "temperature",
    "design",
    "indeed",
    "planning",
    "association",
    "radio",
    "visit",
    "lines",
    "beyond",
    "boy",
    "continued",
    "actually",
    "religious",
    "carried",
    "caught",
    "please",
    "window",
    "horse",
    "describe",
    "corner",
    "additional",
    "approach",
    "dark",
    "language",
    "fear",
    "answer",
    "campaign",
    "performance",
    "immediately",
    "products",
    "opened",
    "truth",
    "consider",
    "obtained",
    "types",
    "appear",
    "marriage",
    "student",
    "french",
    "whose",
    "operation",
    "phase",
    "responsibility",
    "appeared",
    "thinking",
    "facilities",
    "foot",
    "points",
    "poet",
    "understanding",
    "southern",
    "hall",
    "sales",
    "movement",
    "anyone",
    "election",
    "problems",
    "saying",
    "groups",
    "beautiful",
    "instance",
    "remember",
    "paid",
    "plane",
    "carry",
    "poor",
    "wish",
    "series",
    "plays",
    "miss",
    "properties",
    "parts",
    "results",
    "nation",
    "shown",
    "staff",
    "covered",
    "twenty",
    "remained",
    "doctor",
    "administration",
    "concerned",
    "sun",
    "closed",
    "chief",
    "lead",
    "writing",
    "neither",
    "original",
    "follows",
    "prepared",
    "lay",
    "moving",
    "spent",
    "freedom",
    "developed",
    "quality",
    "blood",
    "generally",
    "institutions",
    "expect",
    "led",
    "arms",
    "nuclear",
    "condition",
    "specific",
    "capital",
    "faith",
    "latter",
    "activity",
    "brown",
    "schools",
    "strength",
    "philosophy",
    "comes",
    "getting",
    "waiting",
    "seven",
    "obviously",
    "include",
    "parents",
    "pattern",
    "game",
    "established",
    "related",
    "reading",
    "hit",
    "sitting",
    "allowed",
    "volume",
    "mass",
    "teeth",
    "leaders",
    "agreement",
    "fight",
    "effective",
    "technical",
    "shot",
    "slowly",
    "author",
    "leaving",
    "smile",
    "firm",
    "washington",
    "standard",
    "competition",
    "primary",
    "changed",
    "lived",
    "afternoon",
    "speak",
    "christ",
    "showed",
    "civil",
    "month",
    "sight",
    "article",
    "fifty",
    "walk",
    "larger",
    "religion",
    "heavy",
    "scene",
    "rest",
    "gives",
    "mentioned",
    "remain",
    "hundred",
    "activities",
    "seem",
    "stock",
    "learn",
    "music",
    "secret",
    "produced",
    "factors",
    "dollars",
    "march",
    "selected",
    "professional",
    "applied",
    "makes",
    "enemy",
    "reported",
    "couple",
    "machine",
    "directly",
    "memory",
    "pool",
    "square",
    "methods",
    "principle",
    "village",
    "difference",
    "died",
    "spoke",
    "officer",
    "majority",
    "operations",
    "care",
    "rates",
    "bill",
    "continue",
    "below",
    "degree",
    "decision",
    "success",
    "relations",
    "apparently",
    "corps",
    "clearly",
    "bright",
    "reasons",
    "practice",
    "commission",
    "arm",
    "character",
    "northern",
    "kennedy",
    "limited",
    "finally",
    "aid",
    "meaning",
    "sin",
    "happened",
    "services",
    "ability",
    "concern",
    "leader",
    "soviet",
    "deep",
    "box",
    "naturally",
    "official",
    "contrast",
    "imagine",
    "straight",
    "growing",
    "agreed",
    "bridge",
    "permit",
    "tradition",
    "included",
    "hopes",
    "duty",
    "welfare",
    "status",
    "frequently",
    "worked",
    "recently",
    "standing",
    "marked",
    "model",
    "immediate",
    "district",
    "slightly",
    "increased",
    "broad",
    "spread",
    "scale",
    "reach",
    "complex",
    "citizens",
    "stopped",
    "adequate",
    "criminal",
    "color",
    "hair",
    "myself",
    "teacher",
    "looking",
    "stress",
    "start",
    "peculiar",
    "regard",
    "entirely",
    "opinion",
    "signal",
];
