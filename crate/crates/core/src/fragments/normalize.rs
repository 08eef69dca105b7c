//! Textual normalization of fragment strings so that set membership is
//! insensitive to case, spacing and identifier quoting.

/// Normalize one fragment: identifiers are lowercased and unquoted, runs of
/// whitespace collapse to a single space, spaces hugging brackets, dots and
/// commas are removed (after `(`/`.`, before `)`/`.`/`,`), and single-quoted
/// string literals are kept verbatim.
pub fn normalize_fragment(text: &str) -> String {
    let mut tokens: Vec<Piece> = Vec::new();
    let mut chars = text.chars().peekable();
    let mut pending_space = false;

    while let Some(c) = chars.next() {
        match c {
            '\'' => {
                let mut lit = String::from('\'');
                while let Some(n) = chars.next() {
                    lit.push(n);
                    if n == '\'' {
                        // doubled quote is an escaped quote inside the literal
                        if chars.peek() == Some(&'\'') {
                            lit.push(chars.next().unwrap());
                        } else {
                            break;
                        }
                    }
                }
                push_piece(&mut tokens, &mut pending_space, Piece::Text(lit));
            }
            '[' => {
                let mut ident = String::new();
                while let Some(n) = chars.next() {
                    if n == ']' {
                        if chars.peek() == Some(&']') {
                            ident.push(chars.next().unwrap());
                        } else {
                            break;
                        }
                    } else {
                        ident.push(n);
                    }
                }
                push_piece(&mut tokens, &mut pending_space, Piece::Text(ident.to_lowercase()));
            }
            '"' | '`' => {
                let mut ident = String::new();
                for n in chars.by_ref() {
                    if n == c {
                        break;
                    }
                    ident.push(n);
                }
                push_piece(&mut tokens, &mut pending_space, Piece::Text(ident.to_lowercase()));
            }
            c if c.is_whitespace() => pending_space = true,
            '(' | ')' | '.' | ',' => {
                push_piece(&mut tokens, &mut pending_space, Piece::Punct(c));
            }
            c => {
                let lower: String = c.to_lowercase().collect();
                push_piece(&mut tokens, &mut pending_space, Piece::Text(lower));
            }
        }
    }

    join_pieces(&tokens)
}

#[derive(Debug, PartialEq)]
enum Piece {
    Text(String),
    Punct(char),
    Space,
}

fn push_piece(tokens: &mut Vec<Piece>, pending_space: &mut bool, piece: Piece) {
    if *pending_space && !tokens.is_empty() {
        tokens.push(Piece::Space);
    }
    *pending_space = false;
    tokens.push(piece);
}

/// Spaces are dropped after `(`/`.` and before `)`/`.`/`,`.
fn join_pieces(tokens: &[Piece]) -> String {
    let mut out = String::new();
    for (i, piece) in tokens.iter().enumerate() {
        match piece {
            Piece::Space => {
                let prev = i.checked_sub(1).map(|j| &tokens[j]);
                let next = tokens.get(i + 1);
                let prev_open = matches!(prev, Some(Piece::Punct('(' | '.')));
                let next_close = matches!(next, Some(Piece::Punct(')' | '.' | ',')));
                if !prev_open && !next_close && !out.is_empty() {
                    out.push(' ');
                }
            }
            Piece::Punct(p) => out.push(*p),
            Piece::Text(t) => out.push_str(t),
        }
    }
    out
}
