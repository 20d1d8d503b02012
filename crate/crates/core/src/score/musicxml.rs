//! MusicXML import and export for the supported subset: a single part-wise
//! part with one voice, notes, rests, ties, lyrics, tempo, breath marks and
//! slurs. Anything else that affects timing or voicing is rejected by name.

use std::fmt::Write as _;

use roxmltree::{Document, Node};

use super::{NoteEvent, NoteFlags, Phoneme, PhonemeInventory, Score, ScoreError};

/// Lyric texts that mark a continuation of the previous vowel.
const LONG_VOWEL_MARKS: [&str; 4] = ["ー", "—", "―", "-"];

#[derive(Debug, Clone)]
pub struct ParseOptions {
    pub frame_shift_s: f64,
    /// Used when the score carries no `<sound tempo>`.
    pub default_tempo: Option<f64>,
    pub inventory: PhonemeInventory,
}

impl Default for ParseOptions {
    fn default() -> Self {
        Self {
            frame_shift_s: super::DEFAULT_FRAME_SHIFT,
            default_tempo: None,
            inventory: PhonemeInventory::japanese(),
        }
    }
}

/// Note as read from the document, before frame quantization.
struct RawNote {
    start_s: f64,
    end_s: f64,
    midi: Option<i32>,
    lyric: Option<String>,
    slur: bool,
    breath_mark: bool,
    tie_start: bool,
}

fn unsupported(element: &str, detail: impl Into<String>) -> ScoreError {
    ScoreError::Unsupported {
        element: element.to_string(),
        detail: detail.into(),
    }
}

fn child<'a, 'i>(node: Node<'a, 'i>, name: &str) -> Option<Node<'a, 'i>> {
    node.children().find(|c| c.has_tag_name(name))
}

fn child_text<'a>(node: Node<'a, '_>, name: &str) -> Option<&'a str> {
    child(node, name).and_then(|c| c.text()).map(str::trim)
}

fn parse_num<T: std::str::FromStr>(text: Option<&str>, what: &str) -> Result<T, ScoreError> {
    let text = text.ok_or_else(|| ScoreError::Malformed(format!("missing <{what}>")))?;
    text.parse()
        .map_err(|_| ScoreError::Malformed(format!("bad <{what}> value '{text}'")))
}

fn step_offset(step: &str) -> Result<i32, ScoreError> {
    Ok(match step {
        "C" => 0,
        "D" => 2,
        "E" => 4,
        "F" => 5,
        "G" => 7,
        "A" => 9,
        "B" => 11,
        other => return Err(ScoreError::Malformed(format!("bad <step> '{other}'"))),
    })
}

fn parse_pitch(pitch: Node) -> Result<i32, ScoreError> {
    let step = step_offset(child_text(pitch, "step").unwrap_or(""))?;
    let octave: i32 = parse_num(child_text(pitch, "octave"), "octave")?;
    let alter = match child_text(pitch, "alter") {
        None => 0,
        Some(a) => {
            let v: f64 = a
                .parse()
                .map_err(|_| ScoreError::Malformed(format!("bad <alter> '{a}'")))?;
            if v.fract() != 0.0 {
                return Err(unsupported("alter", "microtonal alteration"));
            }
            v as i32
        }
    };
    Ok((octave + 1) * 12 + step + alter)
}

fn tempo_of(sound: Node) -> Result<Option<f64>, ScoreError> {
    match sound.attribute("tempo") {
        None => Ok(None),
        Some(t) => {
            let bpm: f64 = t
                .trim()
                .parse()
                .map_err(|_| ScoreError::Malformed(format!("bad tempo '{t}'")))?;
            if !(bpm > 0.0 && bpm.is_finite()) {
                return Err(ScoreError::Malformed(format!("non-positive tempo {bpm}")));
            }
            Ok(Some(bpm))
        }
    }
}

/// Parses an uncompressed MusicXML document into a frame-quantized score.
///
/// Note boundaries are rounded to the nearest frame on the absolute time
/// axis, so rounding errors never accumulate along the song.
pub fn parse_musicxml(document: &[u8], opts: &ParseOptions) -> Result<Score, ScoreError> {
    let text = std::str::from_utf8(document)
        .map_err(|e| ScoreError::Malformed(format!("not UTF-8: {e}")))?;
    let doc = Document::parse(text).map_err(|e| ScoreError::Malformed(e.to_string()))?;
    let root = doc.root_element();
    if root.tag_name().name() != "score-partwise" {
        return Err(unsupported(
            root.tag_name().name(),
            "only score-partwise documents are supported",
        ));
    }
    let parts: Vec<_> = root.children().filter(|c| c.has_tag_name("part")).collect();
    let part = match parts.as_slice() {
        [] => return Err(ScoreError::Malformed("document has no <part>".into())),
        [p] => *p,
        _ => return Err(unsupported("part", "multiple parts")),
    };

    let mut divisions: f64 = 1.0;
    let mut tempo: Option<f64> = None;
    let mut first_tempo: Option<f64> = None;
    let mut now_s = 0.0;
    let mut in_slur = false;
    let mut raw: Vec<RawNote> = Vec::new();

    let mut set_tempo = |bpm: f64, tempo: &mut Option<f64>| {
        *tempo = Some(bpm);
        first_tempo.get_or_insert(bpm);
    };

    for measure in part.children().filter(|c| c.is_element()) {
        if !measure.has_tag_name("measure") {
            return Err(unsupported(measure.tag_name().name(), "inside <part>"));
        }
        for el in measure.children().filter(|c| c.is_element()) {
            match el.tag_name().name() {
                "attributes" => {
                    if let Some(d) = child_text(el, "divisions") {
                        divisions = parse_num(Some(d), "divisions")?;
                        if divisions <= 0.0 {
                            return Err(ScoreError::Malformed("non-positive <divisions>".into()));
                        }
                    }
                }
                "direction" => {
                    for sound in el.descendants().filter(|c| c.has_tag_name("sound")) {
                        if let Some(bpm) = tempo_of(sound)? {
                            set_tempo(bpm, &mut tempo);
                        }
                    }
                }
                "sound" => {
                    if let Some(bpm) = tempo_of(el)? {
                        set_tempo(bpm, &mut tempo);
                    }
                }
                "note" => {
                    let note = read_note(el, &mut in_slur)?;
                    let bpm = match tempo.or(opts.default_tempo) {
                        Some(b) => b,
                        None => return Err(ScoreError::MissingTempo),
                    };
                    if tempo.is_none() {
                        set_tempo(bpm, &mut tempo);
                    }
                    let seconds = note.duration / divisions * 60.0 / bpm;
                    let start_s = now_s;
                    now_s += seconds;
                    if note.tie_stop {
                        if let Some(prev) = raw.last_mut() {
                            if prev.tie_start && prev.midi == note.midi && prev.midi.is_some() {
                                prev.end_s = now_s;
                                prev.tie_start = note.tie_start;
                                prev.breath_mark |= note.breath_mark;
                                continue;
                            }
                        }
                        return Err(ScoreError::Malformed(
                            "tie stop without a matching tie start".into(),
                        ));
                    }
                    raw.push(RawNote {
                        start_s,
                        end_s: now_s,
                        midi: note.midi,
                        lyric: note.lyric,
                        slur: note.slur,
                        breath_mark: note.breath_mark,
                        tie_start: note.tie_start,
                    });
                }
                "backup" | "forward" => {
                    return Err(unsupported(el.tag_name().name(), "multiple voices"));
                }
                // layout only
                "print" | "barline" | "bookmark" => {}
                other => return Err(unsupported(other, "inside <measure>")),
            }
        }
    }

    let tempo_bpm = first_tempo
        .or(opts.default_tempo)
        .ok_or(ScoreError::MissingTempo)?;
    build_score(raw, tempo_bpm, opts)
}

struct NoteRead {
    duration: f64,
    midi: Option<i32>,
    lyric: Option<String>,
    slur: bool,
    breath_mark: bool,
    tie_start: bool,
    tie_stop: bool,
}

fn read_note(el: Node, in_slur: &mut bool) -> Result<NoteRead, ScoreError> {
    for name in ["grace", "chord", "cue", "time-modification", "unpitched"] {
        if child(el, name).is_some() {
            let detail = match name {
                "time-modification" => "tuplets",
                "chord" => "chords",
                "grace" => "grace notes",
                "cue" => "cue notes",
                _ => "unpitched notes",
            };
            return Err(unsupported(name, detail));
        }
    }
    if let Some(v) = child_text(el, "voice") {
        if v != "1" {
            return Err(unsupported("voice", format!("voice {v}")));
        }
    }
    let duration: f64 = parse_num(child_text(el, "duration"), "duration")?;
    if duration <= 0.0 {
        return Err(ScoreError::Malformed("non-positive <duration>".into()));
    }
    let midi = if child(el, "rest").is_some() {
        None
    } else {
        let pitch = child(el, "pitch")
            .ok_or_else(|| ScoreError::Malformed("note without <pitch> or <rest>".into()))?;
        Some(parse_pitch(pitch)?)
    };

    let mut tie_start = false;
    let mut tie_stop = false;
    for tie in el.children().filter(|c| c.has_tag_name("tie")) {
        match tie.attribute("type") {
            Some("start") => tie_start = true,
            Some("stop") => tie_stop = true,
            _ => return Err(ScoreError::Malformed("<tie> without a type".into())),
        }
    }

    let mut slur_start = false;
    let mut slur_stop = false;
    let mut breath_mark = false;
    if let Some(notations) = child(el, "notations") {
        for n in notations.descendants().filter(|c| c.is_element()) {
            match n.tag_name().name() {
                "slur" => match n.attribute("type") {
                    Some("start") => slur_start = true,
                    Some("stop") => slur_stop = true,
                    _ => {}
                },
                "breath-mark" => breath_mark = true,
                _ => {}
            }
        }
    }
    if slur_start {
        *in_slur = true;
    }
    let slur = *in_slur && midi.is_some();
    if slur_stop {
        *in_slur = false;
    }

    let lyric = el
        .children()
        .filter(|c| c.has_tag_name("lyric"))
        .find(|l| l.attribute("number").is_none_or(|n| n == "1"))
        .and_then(|l| child_text(l, "text"))
        .map(str::to_string);

    Ok(NoteRead {
        duration,
        midi,
        lyric,
        slur,
        breath_mark,
        tie_start,
        tie_stop,
    })
}

fn build_score(
    raw: Vec<RawNote>,
    tempo_bpm: f64,
    opts: &ParseOptions,
) -> Result<Score, ScoreError> {
    let fs = opts.frame_shift_s;
    let mut notes = Vec::with_capacity(raw.len());
    for (index, r) in raw.into_iter().enumerate() {
        let start = (r.start_s / fs).round() as usize;
        let end = (r.end_s / fs).round() as usize;
        if end <= start {
            return Err(ScoreError::ZeroLengthNote { note: index });
        }
        let mut flags = NoteFlags {
            slur: r.slur,
            breath_mark: r.breath_mark,
            long_vowel_symbol: false,
        };
        let (syllable, mut phonemes) = match (r.midi, r.lyric) {
            (None, _) => (String::new(), Vec::new()),
            (Some(_), Some(text)) if !LONG_VOWEL_MARKS.contains(&text.as_str()) => {
                let phonemes = opts.inventory.segment(&text)?;
                if phonemes.is_empty() {
                    flags.long_vowel_symbol = true;
                    (String::new(), phonemes)
                } else {
                    (text, phonemes)
                }
            }
            // explicit long-vowel mark, or a melisma note without lyric
            (Some(_), _) => {
                flags.long_vowel_symbol = true;
                (String::new(), Vec::new())
            }
        };
        if flags.breath_mark && r.midi.is_some() {
            phonemes.push(Phoneme::breath());
        }
        notes.push(NoteEvent {
            index,
            midi: r.midi,
            length_frames: end - start,
            syllable,
            phonemes,
            flags,
        });
    }
    Ok(Score {
        tempo_bpm,
        frame_shift_s: fs,
        notes,
    })
}

const STEPS: [(&str, i32); 12] = [
    ("C", 0),
    ("C", 1),
    ("D", 0),
    ("D", 1),
    ("E", 0),
    ("F", 0),
    ("F", 1),
    ("G", 0),
    ("G", 1),
    ("A", 0),
    ("A", 1),
    ("B", 0),
];

fn escape(text: &str) -> String {
    text.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

/// Serializes a score so that [`parse_musicxml`] reproduces it.
///
/// Breath phonemes are not written as lyrics; they are re-derived from the
/// breath mark. Durations are written on a fine division grid chosen so the
/// re-parsed frame boundaries land on the original ones.
pub fn write_musicxml(score: &Score) -> String {
    let frames_per_quarter = 60.0 / (score.tempo_bpm * score.frame_shift_s);
    // keep the per-boundary rounding error below a quarter frame
    let divisions = (2.0 * frames_per_quarter.recip() * 4.0).ceil().max(960.0);
    let to_div = |frames: usize| (frames as f64 / frames_per_quarter * divisions).round() as u64;

    let mut out = String::new();
    out.push_str("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n");
    out.push_str("<score-partwise version=\"3.1\">\n");
    out.push_str("  <part-list><score-part id=\"P1\"><part-name>Voice</part-name></score-part></part-list>\n");
    out.push_str("  <part id=\"P1\">\n    <measure number=\"1\">\n");
    let _ = writeln!(
        out,
        "      <attributes><divisions>{divisions}</divisions></attributes>"
    );
    let _ = writeln!(
        out,
        "      <direction><sound tempo=\"{}\"/></direction>",
        score.tempo_bpm
    );

    let mut elapsed = 0usize;
    let n = score.notes.len();
    for (i, note) in score.notes.iter().enumerate() {
        let start_div = to_div(elapsed);
        elapsed += note.length_frames;
        let dur = to_div(elapsed) - start_div;
        out.push_str("      <note>");
        match note.midi {
            None => out.push_str("<rest/>"),
            Some(m) => {
                let (step, alter) = STEPS[m.rem_euclid(12) as usize];
                let octave = m.div_euclid(12) - 1;
                let _ = write!(out, "<pitch><step>{step}</step>");
                if alter != 0 {
                    let _ = write!(out, "<alter>{alter}</alter>");
                }
                let _ = write!(out, "<octave>{octave}</octave></pitch>");
            }
        }
        let _ = write!(out, "<duration>{dur}</duration><voice>1</voice>");

        let prev_slur = i > 0 && score.notes[i - 1].flags.slur;
        let next_slur = i + 1 < n && score.notes[i + 1].flags.slur;
        let mut notations = String::new();
        if note.flags.slur && !prev_slur {
            notations.push_str("<slur type=\"start\" number=\"1\"/>");
        }
        if note.flags.slur && !next_slur {
            notations.push_str("<slur type=\"stop\" number=\"1\"/>");
        }
        if note.flags.breath_mark {
            notations.push_str("<articulations><breath-mark/></articulations>");
        }
        if !notations.is_empty() {
            let _ = write!(out, "<notations>{notations}</notations>");
        }
        if !note.is_rest() {
            let text = if note.flags.long_vowel_symbol {
                LONG_VOWEL_MARKS[0].to_string()
            } else {
                note.syllable.clone()
            };
            let _ = write!(
                out,
                "<lyric number=\"1\"><text>{}</text></lyric>",
                escape(&text)
            );
        }
        out.push_str("</note>\n");
    }
    out.push_str("    </measure>\n  </part>\n</score-partwise>\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn doc(body: &str) -> String {
        format!(
            r#"<?xml version="1.0"?>
<score-partwise version="3.1"><part id="P1"><measure number="1">
<attributes><divisions>4</divisions></attributes>
{body}
</measure></part></score-partwise>"#
        )
    }

    const TEMPO: &str = r#"<direction><sound tempo="120"/></direction>"#;

    fn parse(body: &str) -> Result<Score, ScoreError> {
        parse_musicxml(doc(body).as_bytes(), &ParseOptions::default())
    }

    #[test]
    fn quarter_note_at_120_is_100_frames() {
        let s = parse(&format!(
            "{TEMPO}<note><pitch><step>C</step><octave>4</octave></pitch><duration>4</duration>\
             <lyric><text>ka</text></lyric></note>"
        ))
        .unwrap();
        assert_eq!(s.notes.len(), 1);
        assert_eq!(s.notes[0].length_frames, 100);
        assert_eq!(s.notes[0].midi, Some(60));
        assert_eq!(s.notes[0].phonemes.len(), 2);
    }

    #[test]
    fn whole_measure_rest() {
        let s = parse(&format!(
            "{TEMPO}<note><rest measure=\"yes\"/><duration>16</duration></note>"
        ))
        .unwrap();
        assert!(s.notes[0].is_rest());
        assert!(s.notes[0].phonemes.is_empty());
        assert_eq!(s.notes[0].length_frames, 400);
    }

    #[test]
    fn tied_eighths_merge() {
        let s = parse(&format!(
            "{TEMPO}\
             <note><pitch><step>A</step><octave>4</octave></pitch><duration>2</duration>\
             <tie type=\"start\"/><lyric><text>a</text></lyric></note>\
             <note><pitch><step>A</step><octave>4</octave></pitch><duration>2</duration>\
             <tie type=\"stop\"/></note>"
        ))
        .unwrap();
        assert_eq!(s.notes.len(), 1);
        assert_eq!(s.notes[0].length_frames, 100);
    }

    #[test]
    fn missing_tempo() {
        let body = "<note><pitch><step>A</step><octave>4</octave></pitch><duration>4</duration>\
                    <lyric><text>a</text></lyric></note>";
        assert!(matches!(parse(body), Err(ScoreError::MissingTempo)));
        let opts = ParseOptions {
            default_tempo: Some(60.0),
            ..ParseOptions::default()
        };
        let s = parse_musicxml(doc(body).as_bytes(), &opts).unwrap();
        assert_eq!(s.notes[0].length_frames, 200);
    }

    #[test]
    fn tuplets_and_grace_notes_are_named() {
        let tuplet = format!(
            "{TEMPO}<note><pitch><step>A</step><octave>4</octave></pitch><duration>4</duration>\
             <time-modification><actual-notes>3</actual-notes><normal-notes>2</normal-notes>\
             </time-modification></note>"
        );
        match parse(&tuplet) {
            Err(ScoreError::Unsupported { element, .. }) => {
                assert_eq!(element, "time-modification")
            }
            other => panic!("expected unsupported, got {other:?}"),
        }
        let grace =
            format!("{TEMPO}<note><grace/><pitch><step>A</step><octave>4</octave></pitch></note>");
        match parse(&grace) {
            Err(ScoreError::Unsupported { element, .. }) => assert_eq!(element, "grace"),
            other => panic!("expected unsupported, got {other:?}"),
        }
    }

    #[test]
    fn malformed_xml() {
        assert!(matches!(
            parse_musicxml(b"<score-partwise><part>", &ParseOptions::default()),
            Err(ScoreError::Malformed(_))
        ));
    }

    #[test]
    fn frame_rounding_does_not_drift() {
        // eighth notes at 70 bpm last 85.71 frames each
        let mut body = String::from(r#"<direction><sound tempo="70"/></direction>"#);
        for _ in 0..41 {
            body.push_str(
                "<note><pitch><step>A</step><octave>4</octave></pitch><duration>2</duration>\
                 <lyric><text>a</text></lyric></note>",
            );
        }
        let s = parse(&body).unwrap();
        let expected_total = (41.0 * 30.0 / 70.0 / 0.005_f64).round() as usize;
        assert_eq!(s.total_frames(), expected_total);
        assert!(s
            .notes
            .iter()
            .all(|n| n.length_frames == 85 || n.length_frames == 86));
    }

    #[test]
    fn breath_mark_and_long_vowel_flags() {
        let s = parse(&format!(
            "{TEMPO}\
             <note><pitch><step>A</step><octave>4</octave></pitch><duration>4</duration>\
             <lyric><text>ka</text></lyric></note>\
             <note><pitch><step>B</step><octave>4</octave></pitch><duration>4</duration>\
             <notations><articulations><breath-mark/></articulations></notations>\
             <lyric><text>ー</text></lyric></note>"
        ))
        .unwrap();
        let second = &s.notes[1];
        assert!(second.flags.long_vowel_symbol);
        assert!(second.flags.breath_mark);
        assert!(second.syllable.is_empty());
        assert_eq!(second.phonemes, vec![Phoneme::breath()]);
    }

    #[test]
    fn write_then_parse_is_identity() {
        let s = parse(&format!(
            "{TEMPO}\
             <note><pitch><step>F</step><alter>1</alter><octave>3</octave></pitch><duration>3</duration>\
             <notations><slur type=\"start\"/></notations><lyric><text>sa</text></lyric></note>\
             <note><pitch><step>G</step><octave>3</octave></pitch><duration>1</duration>\
             <notations><slur type=\"stop\"/></notations></note>\
             <note><rest/><duration>2</duration></note>\
             <note><pitch><step>C</step><octave>5</octave></pitch><duration>6</duration>\
             <lyric><text>N</text></lyric></note>"
        ))
        .unwrap();
        let again =
            parse_musicxml(write_musicxml(&s).as_bytes(), &ParseOptions::default()).unwrap();
        assert_eq!(s, again);
    }
}
